"""Stationary covariances of the stochastically forced scalar.

For the viscous generator A (strictly stable when nu > 0) and forcing with
per-coefficient amplitudes psi, the stationary covariance of

    df = A f dt + sqrt(nu) Psi dW

is the unique solution of the Lyapunov equation

    A Q + Q A^T + nu Psi Psi^T = 0,

equivalent to the time integral  nu * int_0^inf exp(tA) Psi Psi^T exp(tA)^T dt,
which :func:`covariance_by_quadrature` evaluates directly as an independent
oracle.  The x-averaged (k1 = 0) block of the shear dynamics is exactly a
bank of scalar OU processes, giving the closed-form diagonal limit
:func:`shear_limit_covariance` with entries psi^2 / (2 j^2) on the (0, j)
coefficients.

Two structural identities hold exactly at the Galerkin level for every flow
and every nu > 0, and the test suite enforces them:

* trace balance  tr(diag(|k|^2) Q) = ||Psi||^2 / 2  (skew advection drops
  out of the trace), and
* norm bound  ||Q||_op <= ||Psi||^2 / (2 lambda_1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg as sla

from .fields import mode_table
from .operators import DENSE_CAP, OperatorMatrix, invariant_blocks

__all__ = [
    "NoiseSpec",
    "CovarianceOperator",
    "LyapunovError",
    "lyapunov_covariance",
    "covariance_by_quadrature",
    "shear_limit_covariance",
    "h1_trace",
    "block_operator_norm",
    "covariance_distance",
    "write_covariance",
    "read_covariance",
    "eigenvalue_summary",
]


class LyapunovError(RuntimeError):
    """Lyapunov solve failed its residual certificate."""


@dataclass(frozen=True)
class NoiseSpec:
    """Forcing amplitudes psi per canonical coefficient.

    Independent scalar Wiener processes drive each coefficient of the real
    orthonormal basis, so Psi Psi^T = diag(psi^2) and the realness pairing
    of conjugate complex modes is automatic.
    """

    N: int
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = mode_table(self.N)
        a = np.array(self.amps, dtype=float)
        if a.shape != (table.size,):
            raise ValueError(
                f"amplitude vector must have shape ({table.size},) for N={self.N}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @classmethod
    def from_modes(cls, N: int, entries: Iterable[tuple]) -> "NoiseSpec":
        """Build from (mode, parity, amplitude) entries, e.g. ((0,1),'cos',1.0)."""
        table = mode_table(N)
        amps = np.zeros(table.size)
        for mode, parity, amplitude in entries:
            idx = table.coefficient_index(mode, parity)
            if amps[idx] != 0.0:
                raise ValueError(f"duplicate forcing entry for {mode} {parity}")
            amps[idx] = float(amplitude)
        return cls(N, amps)

    @property
    def total_intensity(self) -> float:
        """||Psi||^2 = sum psi^2."""
        return float(np.sum(self.amps**2))

    @property
    def support(self) -> np.ndarray:
        """Indices of forced coefficients."""
        return np.flatnonzero(self.amps)


@dataclass(frozen=True)
class CovarianceOperator:
    """Symmetric PSD covariance matrix on the canonical ordering."""

    N: int
    matrix: np.ndarray = field(repr=False)
    provenance: str = "unknown"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = mode_table(self.N).size
        if m.shape != (n, n):
            raise ValueError(f"covariance must be {n} x {n} for N={self.N}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def operator_norm(self) -> float:
        return float(np.max(np.abs(sla.eigvalsh(self.matrix))))

    def min_eigenvalue(self) -> float:
        return float(sla.eigvalsh(self.matrix)[0])


def _check_generator(A: OperatorMatrix, noise: NoiseSpec) -> None:
    if A.kind != "generator":
        raise ValueError("covariance solvers require a generator matrix")
    if noise.N != A.N:
        raise ValueError("noise truncation does not match operator truncation")


def lyapunov_covariance(A: OperatorMatrix, noise: NoiseSpec) -> CovarianceOperator:
    """Stationary covariance from the Lyapunov equation A Q + Q A^T = -nu Psi Psi^T.

    Solved blockwise on the invariant subspaces of A (the forcing matrix is
    diagonal, so cross-block covariance vanishes identically) with the dense
    Bartels-Stewart solver; each solve carries a residual certificate

        ||A Q + Q A^T + nu Psi Psi^T||_F <= 1e-10 (||A||_F ||Q||_F + nu ||Psi||^2)

    and failure raises :class:`LyapunovError`.
    """
    _check_generator(A, noise)
    nu = A.nu or 0.0
    if nu <= 0.0:
        raise ValueError("stationary covariance requires nu > 0")
    n = A.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"dense Lyapunov solver limited to dimension {DENSE_CAP}")
    Asp = A.sparse()
    psi2 = nu * noise.amps**2
    Q = np.zeros((n, n))
    for idx in invariant_blocks(A):
        if not np.any(psi2[idx]):
            continue  # unforced invariant block: Q restricted there is zero
        if len(idx) == 1:
            a = float(Asp[idx[0], idx[0]])
            Q[idx[0], idx[0]] = -psi2[idx[0]] / (2.0 * a)
            continue
        Asub = Asp[np.ix_(idx, idx)].toarray()
        Csub = np.diag(psi2[idx])
        Qsub = sla.solve_continuous_lyapunov(Asub, -Csub)
        Q[np.ix_(idx, idx)] = 0.5 * (Qsub + Qsub.T)
    residual = Asp @ Q + Q @ Asp.T + np.diag(psi2)
    res_norm = float(np.linalg.norm(residual, "fro"))
    a_norm = float(np.sqrt((Asp.multiply(Asp)).sum()))
    bound = 1e-10 * (a_norm * np.linalg.norm(Q, "fro") + nu * noise.total_intensity)
    if res_norm > max(bound, 1e-300):
        raise LyapunovError(
            f"Lyapunov residual {res_norm:.3e} exceeds certificate {bound:.3e}"
        )
    return CovarianceOperator(
        A.N, Q, provenance=f"lyapunov(nu={nu:g})",
        meta={"nu": nu, "residual_fro": res_norm, "s": A.s},
    )


def covariance_by_quadrature(
    A: OperatorMatrix, noise: NoiseSpec, T: float, h: float
) -> CovarianceOperator:
    """Trapezoidal evaluation of nu * int_0^T exp(tA) Psi Psi^T exp(tA)^T dt.

    Independent oracle for :func:`lyapunov_covariance`.  The integrand factor
    exp(t_j A) Psi is advanced recursively by the fixed-step propagator
    exp(h A), so the cost is one dense expm plus one matrix-vector block
    product per step.  The neglected tail is bounded by
    exp(-2 nu lambda_1 T) * nu ||Psi||^2 / (2 nu lambda_1), reported in
    ``meta['tail_bound']``.
    """
    _check_generator(A, noise)
    nu = A.nu or 0.0
    if nu <= 0.0:
        raise ValueError("covariance quadrature requires nu > 0")
    n = A.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"quadrature oracle limited to dimension {DENSE_CAP}")
    steps = int(math.ceil(T / h))
    h_eff = T / steps
    Eh = sla.expm(h_eff * A.dense())
    support = noise.support
    F = np.zeros((n, max(len(support), 1)))
    F[support, np.arange(len(support))] = noise.amps[support]
    Q = 0.5 * h_eff * (F @ F.T)
    for j in range(1, steps + 1):
        F = Eh @ F
        w = 0.5 * h_eff if j == steps else h_eff
        Q += w * (F @ F.T)
    Q *= nu
    lam1 = 1.0
    tail = math.exp(-2.0 * nu * lam1 * T) * nu * noise.total_intensity / (2.0 * nu * lam1)
    return CovarianceOperator(
        A.N, 0.5 * (Q + Q.T), provenance=f"quadrature(nu={nu:g},T={T:g},h={h_eff:g})",
        meta={"nu": nu, "T": T, "h": h_eff, "tail_bound": tail},
    )


def shear_limit_covariance(noise: NoiseSpec) -> CovarianceOperator:
    """Zero-diffusivity limit covariance for non-degenerate shear flows.

    Diagonal, with entry psi^2 / (2 j^2) on every x-independent coefficient
    (mode (0, j)) and zero elsewhere: the x-averaged block is a bank of
    scalar OU processes whose stationary variances survive the limit, while
    the x-dependent block is mixed away.
    """
    table = mode_table(noise.N)
    diag = np.zeros(table.size)
    onaxis = table.k1 == 0
    diag[onaxis] = noise.amps[onaxis] ** 2 / (2.0 * table.k2[onaxis].astype(float) ** 2)
    return CovarianceOperator(noise.N, np.diag(diag), provenance="shear-limit")


def h1_trace(Q: CovarianceOperator) -> float:
    """tr(diag(|k|^2) Q): the mean squared H1 norm under N(0, Q).

    For any Lyapunov covariance of a generator with s = 1 this equals
    ||Psi||^2 / 2 exactly: the trace kills the skew advection part.
    """
    lam = mode_table(Q.N).lam.astype(float)
    return float(np.sum(lam * np.diag(Q.matrix)))


def _selector_mask(N: int, selector) -> np.ndarray:
    table = mode_table(N)
    if selector is None or selector == "all":
        return np.ones(table.size, dtype=bool)
    if selector == "k1-nonzero":
        return table.k1 != 0
    if selector == "k1-zero":
        return table.k1 == 0
    if callable(selector):
        out = np.array(
            [
                bool(selector(int(table.k1[i]), int(table.k2[i]),
                              "cos" if table.parity[i] == 0 else "sin"))
                for i in range(table.size)
            ]
        )
        return out
    raise ValueError(f"unknown selector {selector!r}")


def block_operator_norm(Q: CovarianceOperator, selector="all") -> float:
    """Spectral norm of the principal submatrix picked by a mode predicate.

    ``selector`` is 'all', 'k1-nonzero', 'k1-zero', or a callable
    (k1, k2, parity) -> bool.
    """
    mask = _selector_mask(Q.N, selector)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return 0.0
    sub = Q.matrix[np.ix_(idx, idx)]
    return float(np.max(np.abs(sla.eigvalsh(sub))))


def covariance_distance(Q1: CovarianceOperator, Q2: CovarianceOperator) -> float:
    """Operator (spectral) norm of Q1 - Q2."""
    if Q1.N != Q2.N:
        raise ValueError("covariance truncations do not match")
    diff = Q1.matrix - Q2.matrix
    return float(np.max(np.abs(sla.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

_COV_HEADER = "# torusmix covariance v1"


def write_covariance(Q: CovarianceOperator, path_or_file) -> None:
    """Dense text export: header (N, provenance) then row-major decimals."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        fh.write(_COV_HEADER + "\n")
        fh.write(f"N {Q.N}\n")
        fh.write(f"provenance {Q.provenance}\n")
        for row in Q.matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if own:
            fh.close()


def read_covariance(path_or_file) -> CovarianceOperator:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r") if own else path_or_file
    try:
        if fh.readline().strip() != _COV_HEADER:
            raise ValueError("not a torusmix covariance file")
        tag, N = fh.readline().split()
        assert tag == "N"
        provenance = fh.readline().split(maxsplit=1)[1].strip()
        rows = [np.array(line.split(), dtype=float) for line in fh if line.strip()]
        return CovarianceOperator(int(N), np.vstack(rows), provenance=provenance)
    finally:
        if own:
            fh.close()


def eigenvalue_summary(Q: CovarianceOperator) -> np.ndarray:
    """Eigenvalues of Q, descending (for the CSV summary export)."""
    return sla.eigvalsh(Q.matrix)[::-1]
