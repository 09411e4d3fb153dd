import math

import numpy as np
import pytest

from torusmix import (
    NoiseSpec,
    SimConfig,
    empirical_covariance,
    energy_balance_residual,
    make_field,
    mode_table,
    simulate,
)
from torusmix.simulate import CovarianceAccumulator


def single_mode_noise(N, amp=1.0):
    return NoiseSpec.from_modes(N, [((0, 1), "cos", amp)])


def zero_noise(N):
    return NoiseSpec(N, np.zeros(mode_table(N).size))


def test_config_validation():
    noise = single_mode_noise(4)
    with pytest.raises(ValueError):
        SimConfig(flow=None, nu=0.1, noise=noise, dt=-0.1)
    with pytest.raises(ValueError):
        SimConfig(flow=None, nu=0.1, noise=noise, horizon=1.0, burn_in=2.0)
    with pytest.raises(ValueError):
        SimConfig(flow=None, nu=0.1, noise=noise, scheme="Euler")
    with pytest.raises(ValueError):
        SimConfig(flow=None, nu=0.1, noise=noise, ensemble=0)


def test_noiseless_em_contracts(shear):
    # nu Psi = 0 reduces the step to deterministic semi-implicit advection;
    # the L2 norm is then nonincreasing for nu > 0
    N = 4
    cfg = SimConfig(flow=shear, nu=0.5, noise=zero_noise(N), scheme="SemiImplicitEM",
                    dt=0.01, horizon=1.0, burn_in=0.0, ensemble=1, seed=0)
    f0 = make_field(N, [((0, 1), "cos", 1.0), ((2, 1), "sin", 0.5)])
    stats = simulate(cfg, f0)
    assert np.all(np.diff(stats.mean_l2_sq) <= 1e-14)
    assert stats.sample_count == len(stats.times)


def test_seed_reproducibility(shear):
    N = 4
    cfg = SimConfig(flow=shear, nu=0.1, noise=single_mode_noise(N),
                    scheme="SemiImplicitEM", dt=0.1, horizon=5.0, burn_in=1.0,
                    ensemble=4, seed=123)
    f0 = make_field(N, [])
    a = simulate(cfg, f0)
    b = simulate(cfg, f0)
    assert np.array_equal(a.mean_l2_sq, b.mean_l2_sq)
    assert np.array_equal(a.mean_h1_sq, b.mean_h1_sq)
    assert np.array_equal(a.accumulator.m2, b.accumulator.m2)
    # a different seed produces different trajectories
    c = simulate(SimConfig(flow=shear, nu=0.1, noise=single_mode_noise(N),
                           scheme="SemiImplicitEM", dt=0.1, horizon=5.0, burn_in=1.0,
                           ensemble=4, seed=124), f0)
    assert not np.array_equal(a.mean_l2_sq, c.mean_l2_sq)


def test_worker_count_does_not_change_results(shear):
    N = 4
    cfg = SimConfig(flow=shear, nu=0.1, noise=single_mode_noise(N),
                    scheme="ExactGaussian", dt=0.25, horizon=10.0, burn_in=2.0,
                    ensemble=6, seed=5)
    f0 = make_field(N, [])
    serial = simulate(cfg, f0, workers=1)
    threaded = simulate(cfg, f0, workers=3)
    assert np.array_equal(serial.accumulator.m2, threaded.accumulator.m2)
    assert np.array_equal(serial.mean_h1_sq, threaded.mean_h1_sq)


def test_exact_gaussian_ou_variance():
    # u = 0, single forced mode: empirical stationary variance approaches
    # psi^2/(2 |k|^2) within 3 standard errors (M * samples >= 1e4)
    N = 4
    cfg = SimConfig(flow=None, nu=0.1, noise=single_mode_noise(N),
                    scheme="ExactGaussian", dt=0.5, horizon=300.0, burn_in=25.0,
                    ensemble=32, seed=42)
    stats = simulate(cfg, make_field(N, []), keep_member_covariances=True)
    assert stats.sample_count >= 10_000
    Q = empirical_covariance(stats)
    i = mode_table(N).index[(0, 1, "cos")]
    entries = np.array([c[i, i] for c in stats.member_covariances])
    se = entries.std(ddof=1) / math.sqrt(len(entries))
    assert abs(Q.matrix[i, i] - 0.5) <= 3.0 * se
    # everything off the forced coefficient stays at noise level
    off = Q.matrix.copy()
    off[i, i] = 0.0
    assert np.max(np.abs(off)) < 0.05


def test_empirical_covariance_trivial_case():
    # zero noise from zero data: the covariance accumulator sees only zeros
    N = 3
    cfg = SimConfig(flow=None, nu=0.2, noise=zero_noise(N), scheme="SemiImplicitEM",
                    dt=0.1, horizon=2.0, burn_in=0.0, ensemble=1, seed=0)
    stats = simulate(cfg, make_field(N, []))
    assert np.all(empirical_covariance(stats).matrix == 0.0)
    with pytest.raises(ValueError):  # burn-in must leave room for samples
        SimConfig(flow=None, nu=0.2, noise=zero_noise(N), scheme="SemiImplicitEM",
                  dt=1.0, horizon=1.0, burn_in=1.0, ensemble=1, seed=0)


def test_energy_balance_deterministic_dt_convergence():
    # zero noise, u = 0, one mode: the residual is pure scheme error and
    # shrinks at first order as dt halves (exact decay e^{-2 nu |k|^2 t})
    N = 3
    nu = 0.3
    f0 = make_field(N, [((0, 1), "cos", 1.0)])
    residuals = []
    for dt in (0.1, 0.05, 0.025):
        cfg = SimConfig(flow=None, nu=nu, noise=zero_noise(N), scheme="SemiImplicitEM",
                        dt=dt, horizon=2.0, burn_in=0.0, ensemble=1, seed=0)
        stats = simulate(cfg, f0)
        residuals.append(abs(energy_balance_residual(stats, (0.0, 2.0))))
    # also check the scheme converges to the exact heat decay
    orders = [math.log2(a / b) for a, b in zip(residuals, residuals[1:])]
    assert min(orders) >= 0.9
    cfg = SimConfig(flow=None, nu=nu, noise=zero_noise(N), scheme="SemiImplicitEM",
                    dt=0.025, horizon=2.0, burn_in=0.0, ensemble=1, seed=0)
    stats = simulate(cfg, f0)
    exact = math.exp(-2 * nu * 2.0)
    assert stats.mean_l2_sq[-1] == pytest.approx(exact, rel=0.05)


def test_exact_gaussian_stationary_energy_balance(shear):
    # exact-in-law stepping: the balance residual is mean-zero noise
    N = 4
    cfg = SimConfig(flow=shear, nu=0.1, noise=single_mode_noise(N),
                    scheme="ExactGaussian", dt=0.5, horizon=200.0, burn_in=50.0,
                    ensemble=24, seed=9)
    stats = simulate(cfg, make_field(N, []))
    res = energy_balance_residual(stats, (50.0, 200.0))
    se = stats.member_residuals.std(ddof=1) / math.sqrt(cfg.ensemble)
    assert abs(res) <= 5.0 * se
    with pytest.raises(ValueError, match="grid"):
        energy_balance_residual(stats, (50.0, 199.87))
    with pytest.raises(ValueError):
        energy_balance_residual(stats, (60.0, 60.0))


def test_stationary_h1_level(shear):
    # time-averaged E ||f||_H1^2 = ||Psi||^2 / 2 within 5%
    N = 4
    noise = NoiseSpec.from_modes(N, [((0, 1), "cos", 1.0), ((1, 1), "sin", 0.7)])
    cfg = SimConfig(flow=shear, nu=0.2, noise=noise, scheme="ExactGaussian",
                    dt=0.5, horizon=300.0, burn_in=25.0, ensemble=40, seed=11)
    stats = simulate(cfg, make_field(N, []))
    assert stats.sample_count >= 10_000
    level = stats.member_h1_means.mean()
    assert level == pytest.approx(noise.total_intensity / 2.0, rel=0.05)


def test_gaussianity_of_stationary_coefficients():
    # the invariant law is Gaussian: per-coefficient skewness and excess
    # kurtosis vanish within tight bands at 1e5 samples
    N = 3
    cfg = SimConfig(flow=None, nu=0.1, noise=single_mode_noise(N),
                    scheme="ExactGaussian", dt=0.5, horizon=1075.0, burn_in=25.0,
                    ensemble=48, seed=31)
    stats = simulate(cfg, make_field(N, []),
                     track_coefficients=(((0, 1), "cos"),))
    samples = stats.tracked_samples[((0, 1), "cos")]
    assert samples.size >= 100_000
    x = samples - samples.mean()
    m2 = np.mean(x**2)
    skew = np.mean(x**3) / m2**1.5
    kurt = np.mean(x**4) / m2**2 - 3.0
    assert -0.1 < skew < 0.1
    assert -0.2 < kurt < 0.2


def test_exponential_moment_tail(shear):
    # fraction of samples with ||f||^2 above 5 ||Psi||^2/(nu lambda_1) < 1%
    N = 4
    nu = 0.1
    noise = single_mode_noise(N)
    cfg = SimConfig(flow=shear, nu=nu, noise=noise, scheme="ExactGaussian",
                    dt=0.5, horizon=150.0, burn_in=25.0, ensemble=24, seed=3)
    stats = simulate(cfg, make_field(N, []), keep_member_norms=True)
    burn = int(round(cfg.burn_in / cfg.dt))
    samples = stats.member_l2_sq[:, burn:].ravel()
    threshold = 5.0 * noise.total_intensity / nu
    assert np.mean(samples > threshold) < 0.01


def test_scheme_agreement_as_dt_shrinks(shear):
    # SemiImplicitEM approaches the ExactGaussian stationary variance; each
    # dt stays within the combined statistical + O(dt) bias tolerance
    N = 4
    nu = 0.1
    noise = single_mode_noise(N)
    i = mode_table(N).index[(0, 1, "cos")]

    eg = SimConfig(flow=shear, nu=nu, noise=noise, scheme="ExactGaussian",
                   dt=0.5, horizon=550.0, burn_in=50.0, ensemble=32, seed=17)
    stats_eg = simulate(eg, make_field(N, []), keep_member_covariances=True)
    v_eg = empirical_covariance(stats_eg).matrix[i, i]
    ent = np.array([c[i, i] for c in stats_eg.member_covariances])
    se_eg = ent.std(ddof=1) / math.sqrt(len(ent))

    for dt in (0.1, 0.05, 0.025):
        em = SimConfig(flow=shear, nu=nu, noise=noise, scheme="SemiImplicitEM",
                       dt=dt, horizon=550.0, burn_in=50.0, ensemble=32, seed=18)
        stats_em = simulate(em, make_field(N, []), keep_member_covariances=True)
        v_em = empirical_covariance(stats_em).matrix[i, i]
        ent_em = np.array([c[i, i] for c in stats_em.member_covariances])
        se_em = ent_em.std(ddof=1) / math.sqrt(len(ent_em))
        # scalar semi-implicit bias bound: (psi^2/(2 lam)) * dt nu lam / 2, doubled
        bias = 0.5 * dt * nu * 1.0
        assert abs(v_em - v_eg) <= 5.0 * (se_em + se_eg) + bias


def test_instability_guard():
    # a wildly explicit-unstable configuration must abort, not overflow
    from torusmix import SimulationUnstable
    from torusmix.flows import ShearProfile, make_shear

    N = 6
    strong = make_shear(ShearProfile(sin_amps=(40.0,)))
    cfg = SimConfig(flow=strong, nu=0.0, noise=zero_noise(N),
                    scheme="SemiImplicitEM", dt=0.9, horizon=450.0, ensemble=1, seed=0)
    f0 = make_field(N, [((1, 0), "cos", 1.0)])
    with pytest.raises(SimulationUnstable):
        simulate(cfg, f0)


def test_accumulator_merge_matches_batch(rng):
    dim = 5
    xs = rng.standard_normal((40, dim))
    one = CovarianceAccumulator(dim)
    for x in xs:
        one.add(x)
    left, right = CovarianceAccumulator(dim), CovarianceAccumulator(dim)
    for x in xs[:13]:
        left.add(x)
    for x in xs[13:]:
        right.add(x)
    left.merge(right)
    assert np.allclose(left.covariance(), np.cov(xs.T, ddof=1), atol=1e-12)
    assert np.allclose(left.covariance(), one.covariance(), atol=1e-12)
    assert left.count == 40


def test_accumulator_insufficient_samples():
    acc = CovarianceAccumulator(3)
    acc.add(np.zeros(3))
    with pytest.raises(ValueError, match="at least 2"):
        acc.covariance()
