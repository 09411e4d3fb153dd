"""Config-driven experiment runner.

Subcommands::

    torusmix validate --config exp.ini
    torusmix run --config exp.ini [--out DIR] [--threads K] [--seed S]

Configs are INI files (sections of key = value pairs); coefficient lists use
the same ``k1 k2 cos|sin amplitude`` records as the field serialization
format, one per line.  See the annotated examples under ``configs/`` and the
schema section of the README.

Every run writes its result CSVs plus ``manifest.txt`` (the fully resolved
config, seed, code version and RNG algorithm -- enough to reproduce the run)
and ``timestamps.txt`` (wall-clock bookkeeping, kept separate so result
payloads are byte-identical across reruns).  Failures exit nonzero and leave
a machine-readable ``error.json``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .covariance import (
    NoiseSpec,
    block_operator_norm,
    covariance_distance,
    eigenvalue_summary,
    h1_trace,
    lyapunov_covariance,
    shear_limit_covariance,
    write_covariance,
)
from .fields import FourierField, make_field, mode_table, parse_record
from .flows import Flow, ShearProfile, make_cellular, make_custom, make_shear
from .operators import DENSE_CAP, advection_matrix, generator, semigroup_norm
from .simulate import RNG_ALGORITHM, SimConfig, empirical_covariance, simulate
from .spectral import h1_growth_average, spectrum, streamline_projection

EXPERIMENTS = (
    "covariance-ladder",
    "simulate",
    "spectrum",
    "growth",
    "dissipation-probe",
    "cellular-support",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentSpec:
    """Parsed and validated experiment plan."""

    experiment: str
    N: int
    flow: Flow | None
    noise: NoiseSpec | None
    params: dict
    out: Path
    threads: int = 1
    warnings: list = dc_field(default_factory=list)

    @property
    def dimension(self) -> int:
        return (2 * self.N + 1) ** 2 - 1


def _parse_records(text: str):
    return [parse_record(line) for line in text.splitlines() if line.strip()]


def _parse_floats(text: str, name: str, problems: list) -> list:
    try:
        return [float(v) for v in text.split()]
    except ValueError:
        problems.append(f"{name}: expected whitespace-separated numbers, got {text!r}")
        return []


def _build_flow(cfg: configparser.ConfigParser, N: int, problems: list) -> Flow | None:
    if not cfg.has_section("flow"):
        problems.append("flow: section missing")
        return None
    kind = cfg.get("flow", "kind", fallback=None)
    if kind is None:
        problems.append("flow.kind: missing (shear | cellular | custom | none)")
        return None
    if kind == "none":
        return None
    try:
        if kind == "shear":
            # same record format as field files; shear profiles live on the
            # (0, j) modes and amplitudes are plain cos(jy)/sin(jy) weights
            cos_amps, sin_amps = {}, {}
            for mode, parity, amp in _parse_records(cfg.get("flow", "profile", fallback="")):
                if mode.k1 != 0 or mode.k2 < 1:
                    raise ValueError(
                        f"shear profile record needs k1 = 0 and k2 >= 1, got {tuple(mode)}"
                    )
                (cos_amps if parity == "cos" else sin_amps)[mode.k2] = amp
            jmax = max(list(cos_amps) + list(sin_amps), default=0)
            profile = ShearProfile(
                cos_amps=tuple(cos_amps.get(j, 0.0) for j in range(1, jmax + 1)),
                sin_amps=tuple(sin_amps.get(j, 0.0) for j in range(1, jmax + 1)),
            )
            return make_shear(profile)
        if kind in ("cellular", "custom"):
            psi_N = cfg.getint("flow", "streamfunction_N", fallback=N)
            entries = _parse_records(cfg.get("flow", "streamfunction", fallback=""))
            psi = make_field(psi_N, entries)
            return make_cellular(psi) if kind == "cellular" else make_custom(psi)
    except (ValueError, KeyError) as exc:
        problems.append(f"flow: {exc}")
        return None
    problems.append(f"flow.kind: unknown kind {kind!r}")
    return None


def _build_noise(cfg, N: int, problems: list) -> NoiseSpec | None:
    if not cfg.has_section("noise"):
        return None
    try:
        entries = _parse_records(cfg.get("noise", "modes", fallback=""))
        return NoiseSpec.from_modes(N, entries)
    except ValueError as exc:
        problems.append(f"noise: {exc}")
        return None


_REQUIRED = {
    "covariance-ladder": ("flow", "noise", "nu_ladder"),
    "simulate": ("noise", "nu", "dt", "horizon", "ensemble", "seed"),
    "spectrum": ("flow",),
    "growth": ("flow", "f0", "T"),
    "dissipation-probe": ("flow", "tau", "nu_ladder"),
    "cellular-support": ("flow", "noise", "nu_ladder"),
}


def parse_spec(path) -> ExperimentSpec:
    """Parse + validate a config file; raises ConfigError listing every violation."""
    cfg = configparser.ConfigParser(interpolation=None)
    read = cfg.read(path)
    problems: list = []
    warnings: list = []
    if not read:
        raise ConfigError([f"config file {path!r} not found or unreadable"])
    if not cfg.has_section("experiment"):
        raise ConfigError(["experiment: section missing"])
    experiment = cfg.get("experiment", "type", fallback=None)
    if experiment not in EXPERIMENTS:
        problems.append(
            f"experiment.type: got {experiment!r}, want one of {', '.join(EXPERIMENTS)}"
        )
    N = None
    if cfg.get("experiment", "N", fallback=None) is None:
        problems.append("experiment.N: missing")
    else:
        try:
            N = cfg.getint("experiment", "N")
            if N < 1:
                problems.append(f"experiment.N: must be >= 1, got {N}")
                N = None
        except ValueError:
            problems.append("experiment.N: not an integer")
    if N is None or experiment not in EXPERIMENTS:
        raise ConfigError(problems)

    flow = _build_flow(cfg, N, problems)
    noise = _build_noise(cfg, N, problems)
    section = experiment
    params: dict = {}

    def need(key: str):
        return key in _REQUIRED[experiment]

    if need("flow") and flow is None and not problems:
        problems.append("flow: this experiment requires a nonzero flow")
    if need("noise") and noise is None:
        problems.append("noise: section with forcing modes required")
    if noise is not None and noise.total_intensity == 0.0 and need("noise"):
        warnings.append("noise: zero total intensity (degenerate experiment)")

    getf = lambda key, fb=None: cfg.get(section, key, fallback=fb)

    if need("nu_ladder"):
        text = getf("nu", "")
        ladder = _parse_floats(text, f"{section}.nu", problems) if text else []
        if not text:
            problems.append(f"{section}.nu: missing viscosity ladder")
        if experiment in ("covariance-ladder", "cellular-support") and any(
            v <= 0 for v in ladder
        ):
            problems.append(f"{section}.nu: requires nu > 0 (no stationary covariance at nu = 0)")
        if experiment == "dissipation-probe" and any(v <= 0 for v in ladder):
            problems.append(f"{section}.nu: requires nu > 0")
        params["nu_ladder"] = ladder

    if experiment == "simulate":
        for key, conv, required in (
            ("nu", float, True),
            ("dt", float, True),
            ("horizon", float, True),
            ("ensemble", int, True),
            ("seed", int, True),
        ):
            raw = getf(key)
            if raw is None:
                problems.append(f"{section}.{key}: missing")
                continue
            try:
                params[key] = conv(raw)
            except ValueError:
                problems.append(f"{section}.{key}: bad value {raw!r}")
        try:
            raw = getf("burn_in")
            # omitted: five e-folds of the slowest heat rate, 5/(nu lambda_1)
            params["burn_in"] = float(raw) if raw is not None else None
            params["s"] = float(getf("s", "1.0"))
        except ValueError as exc:
            problems.append(f"{section}.burn_in/s: {exc}")
        params["scheme"] = getf("scheme", "SemiImplicitEM")
        if params.get("scheme") not in ("SemiImplicitEM", "ExactGaussian"):
            problems.append(f"{section}.scheme: unknown scheme {params.get('scheme')!r}")
        if "nu" in params and params["nu"] < 0:
            problems.append(f"{section}.nu: must be >= 0")
        f0_text = getf("f0", "")
        try:
            params["f0"] = make_field(N, _parse_records(f0_text))
        except ValueError as exc:
            problems.append(f"{section}.f0: {exc}")

    if experiment == "growth":
        text = getf("T", "")
        if not text:
            problems.append(f"{section}.T: missing list of horizons")
        params["T"] = _parse_floats(text, f"{section}.T", problems)
        if any(v <= 0 for v in params.get("T", [])):
            problems.append(f"{section}.T: horizons must be positive")
        params["method"] = getf("method", "auto")
        h_raw = getf("h")
        params["h"] = float(h_raw) if h_raw is not None else None
        try:
            params["f0"] = make_field(N, _parse_records(getf("f0", "")))
            if not np.any(params["f0"].coeffs):
                problems.append(f"{section}.f0: zero initial datum rejected")
        except ValueError as exc:
            problems.append(f"{section}.f0: {exc}")

    if experiment == "dissipation-probe":
        raw = getf("tau")
        if raw is None:
            problems.append(f"{section}.tau: missing")
        else:
            params["tau"] = float(raw)
            if params["tau"] <= 0:
                problems.append(f"{section}.tau: must be positive")

    if experiment == "cellular-support":
        params["bins"] = cfg.getint(section, "bins", fallback=64)
        params["grid"] = cfg.getint(section, "grid", fallback=max(256, 4 * N))
        if params["bins"] < 2:
            problems.append(f"{section}.bins: need at least 2")
        if params["grid"] < 4 * N:
            problems.append(f"{section}.grid: need grid >= 4 N = {4 * N}")
        if flow is not None and flow.streamfunction is None:
            problems.append("flow: cellular-support requires a cellular/custom flow")

    if flow is not None and flow.max_wavenumber > 2 * N:
        problems.append(
            f"flow: velocity support {flow.max_wavenumber} exceeds 2 N = {2 * N}"
        )

    dim = (2 * N + 1) ** 2 - 1
    needs_dense = experiment in ("covariance-ladder", "cellular-support", "simulate",
                                 "spectrum")
    if needs_dense and dim > DENSE_CAP:
        warnings.append(
            f"dimension {dim} exceeds the dense solver cap {DENSE_CAP}; "
            "dense Lyapunov/eigen solves will be refused"
        )

    if problems:
        raise ConfigError(problems)

    out = Path(cfg.get("experiment", "out", fallback="torusmix-out"))
    threads = cfg.getint("experiment", "threads", fallback=1)
    return ExperimentSpec(
        experiment=experiment, N=N, flow=flow, noise=noise, params=params,
        out=out, threads=threads, warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Reporting helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return "auto"
    return str(v)


def _write_manifest(spec: ExperimentSpec, outdir: Path, seed_override) -> None:
    lines = [
        f"torusmix_version = {__version__}",
        f"experiment = {spec.experiment}",
        f"N = {spec.N}",
        f"dimension = {spec.dimension}",
        f"threads = {spec.threads}",
        f"rng_algorithm = {RNG_ALGORITHM}",
        "mode_ordering = (|k|^2, |k1|, |k2|, k1, k2), cos before sin",
    ]
    if seed_override is not None:
        lines.append(f"seed_override = {seed_override}")
    if spec.flow is not None:
        lines.append(f"flow.kind = {spec.flow.kind}")
        lines.append(f"flow.max_wavenumber = {spec.flow.max_wavenumber}")
        lines.append(f"flow.lipschitz_bound = {_fmt(spec.flow.lipschitz_bound)}")
        if spec.flow.profile is not None:
            lines.append(f"flow.profile.cos = {' '.join(map(_fmt, spec.flow.profile.cos_amps))}")
            lines.append(f"flow.profile.sin = {' '.join(map(_fmt, spec.flow.profile.sin_amps))}")
        if spec.flow.streamfunction is not None:
            psi = spec.flow.streamfunction
            t = psi.table
            recs = "; ".join(
                f"{t.k1[i]} {t.k2[i]} {'cos' if t.parity[i] == 0 else 'sin'} {psi.coeffs[i]:.17g}"
                for i in np.flatnonzero(psi.coeffs)
            )
            lines.append(f"flow.streamfunction.N = {psi.N}")
            lines.append(f"flow.streamfunction = {recs}")
    else:
        lines.append("flow.kind = none")
    if spec.noise is not None:
        t = mode_table(spec.N)
        recs = "; ".join(
            f"{t.k1[i]} {t.k2[i]} {'cos' if t.parity[i] == 0 else 'sin'} {spec.noise.amps[i]:.17g}"
            for i in spec.noise.support
        )
        lines.append(f"noise.modes = {recs}")
        lines.append(f"noise.intensity = {_fmt(spec.noise.total_intensity)}")
    for key, value in sorted(spec.params.items()):
        if isinstance(value, FourierField):
            t = value.table
            recs = "; ".join(
                f"{t.k1[i]} {t.k2[i]} {'cos' if t.parity[i] == 0 else 'sin'} {value.coeffs[i]:.17g}"
                for i in np.flatnonzero(value.coeffs)
            )
            lines.append(f"{spec.experiment}.{key} = {recs}")
        elif isinstance(value, list):
            lines.append(f"{spec.experiment}.{key} = {' '.join(map(_fmt, value))}")
        else:
            lines.append(f"{spec.experiment}.{key} = {_fmt(value)}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_eigs_csv(path: Path, Q) -> None:
    eigs = eigenvalue_summary(Q)
    _write_csv(path, ["index", "eigenvalue"], list(enumerate(eigs)))


# ---------------------------------------------------------------------------
# Experiment bodies
# ---------------------------------------------------------------------------


def _run_covariance_ladder(spec: ExperimentSpec, outdir: Path) -> None:
    Q0 = shear_limit_covariance(spec.noise)
    rows = []
    for i, nu in enumerate(spec.params["nu_ladder"]):
        A = generator(spec.flow, nu, spec.N)
        Q = lyapunov_covariance(A, spec.noise)
        write_covariance(Q, outdir / f"covariance_{i:02d}.txt")
        _write_eigs_csv(outdir / f"eigenvalues_{i:02d}.csv", Q)
        rows.append(
            (nu, h1_trace(Q), block_operator_norm(Q, "k1-nonzero"),
             covariance_distance(Q, Q0))
        )
    _write_csv(outdir / "summary.csv",
               ["nu", "h1_trace", "offblock_norm", "dist_to_Q0"], rows)


def _run_simulate(spec: ExperimentSpec, outdir: Path, seed_override) -> None:
    p = spec.params
    seed = seed_override if seed_override is not None else p["seed"]
    config = SimConfig(
        flow=spec.flow, nu=p["nu"], noise=spec.noise, scheme=p["scheme"],
        dt=p["dt"], horizon=p["horizon"], burn_in=p["burn_in"],
        ensemble=p["ensemble"], seed=seed, s=p["s"],
    )
    stats = simulate(config, p["f0"], workers=spec.threads)
    stats.write_csv(outdir / "stats.csv")
    if stats.accumulator.count >= 2:
        Q = empirical_covariance(stats)
        write_covariance(Q, outdir / "empirical_covariance.txt")
        _write_eigs_csv(outdir / "eigenvalues.csv", Q)


def _run_spectrum(spec: ExperimentSpec, outdir: Path) -> None:
    B = advection_matrix(spec.flow, spec.N)
    report = spectrum(B)
    report.to_csv(outdir / "spectrum.csv")
    _write_csv(outdir / "summary.csv", ["kernel_dim", "dimension"],
               [(report.kernel_dim, spec.dimension)])


def _run_growth(spec: ExperimentSpec, outdir: Path) -> None:
    p = spec.params
    curve = h1_growth_average(spec.flow, p["f0"], p["T"], method=p["method"], h=p["h"])
    curve.to_csv(outdir / "growth.csv")


def _run_dissipation_probe(spec: ExperimentSpec, outdir: Path) -> None:
    tau = spec.params["tau"]
    rows = []
    for nu in spec.params["nu_ladder"]:
        A = generator(spec.flow, nu, spec.N)
        t = tau / nu
        rows.append((nu, t, semigroup_norm(A, t), math.exp(-nu * t)))
    _write_csv(outdir / "probe.csv", ["nu", "t", "norm", "heat_bound"], rows)


def _run_cellular_support(spec: ExperimentSpec, outdir: Path) -> None:
    p = spec.params
    rows = []
    for nu in spec.params["nu_ladder"]:
        A = generator(spec.flow, nu, spec.N)
        Q = lyapunov_covariance(A, spec.noise)
        eigvals, eigvecs = np.linalg.eigh(Q.matrix)
        v = FourierField(spec.N, eigvecs[:, -1])
        pv = streamline_projection(spec.flow, v, bins=p["bins"], grid=p["grid"])
        ppv = streamline_projection(spec.flow, pv, bins=p["bins"], grid=p["grid"])
        dev = (v - pv).norm(0) / v.norm(0)
        idem = (pv - ppv).norm(0) / max(pv.norm(0), 1e-300)
        rows.append((nu, eigvals[-1], dev, idem))
    _write_csv(outdir / "support.csv",
               ["nu", "top_eigenvalue", "rel_deviation", "idempotence_deviation"], rows)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run(spec: ExperimentSpec, seed_override=None) -> None:
    outdir = spec.out
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    _write_manifest(spec, outdir, seed_override)
    if spec.experiment == "covariance-ladder":
        _run_covariance_ladder(spec, outdir)
    elif spec.experiment == "simulate":
        _run_simulate(spec, outdir, seed_override)
    elif spec.experiment == "spectrum":
        _run_spectrum(spec, outdir)
    elif spec.experiment == "growth":
        _run_growth(spec, outdir)
    elif spec.experiment == "dissipation-probe":
        _run_dissipation_probe(spec, outdir)
    elif spec.experiment == "cellular-support":
        _run_cellular_support(spec, outdir)
    else:  # pragma: no cover - parse_spec guards this
        raise ConfigError([f"experiment.type: unknown {spec.experiment!r}"])
    finished = time.time()
    (outdir / "timestamps.txt").write_text(
        f"started_unix = {started:.3f}\nfinished_unix = {finished:.3f}\n"
        f"elapsed_seconds = {finished - started:.3f}\n"
    )


def validate_report(spec: ExperimentSpec) -> str:
    lines = [
        "ok",
        f"experiment = {spec.experiment}",
        f"dimension = {spec.dimension}",
        f"memory_estimate_mb = {spec.dimension**2 * 8 / 1e6:.1f}",
        f"runtime_class = {'seconds' if spec.dimension <= 700 else 'minutes' if spec.dimension <= DENSE_CAP else 'tens-of-minutes'}",
    ]
    for w in spec.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def _error_record(exc: Exception) -> dict:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        record["fields"] = exc.problems
    return record


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="torusmix", description="Passive-scalar invariant measure experiments."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=None, help="worker cap")
        p.add_argument("--seed", type=int, default=None, help="seed override")
    args = parser.parse_args(argv)

    try:
        spec = parse_spec(args.config)
    except ConfigError as exc:
        if args.command == "validate":
            # the report carries the failures; nonzero exit for scripting
            print("invalid")
            for problem in exc.problems:
                print(f"error: {problem}")
            return 1
        print(json.dumps(_error_record(exc)), file=sys.stderr)
        return 2
    if args.out is not None:
        spec.out = Path(args.out)
    if args.threads is not None:
        spec.threads = args.threads

    if args.command == "validate":
        print(validate_report(spec))
        return 0

    try:
        run(spec, seed_override=args.seed)
    except Exception as exc:  # numerical failures carry their diagnostics
        record = _error_record(exc)
        print(json.dumps(record), file=sys.stderr)
        try:
            spec.out.mkdir(parents=True, exist_ok=True)
            (spec.out / "error.json").write_text(json.dumps(record) + "\n")
        except OSError:
            pass
        return 3
    for w in spec.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
