import io
import math

import numpy as np
import pytest

from torusmix import (
    NoiseSpec,
    block_operator_norm,
    covariance_by_quadrature,
    covariance_distance,
    eigenvalue_summary,
    generator,
    h1_trace,
    lyapunov_covariance,
    mode_table,
    read_covariance,
    shear_limit_covariance,
    write_covariance,
)
from torusmix.fields import random_field


def unit_noise(N, entries):
    return NoiseSpec.from_modes(N, entries)


# ---------------------------------------------------------------------------
# Lyapunov solve
# ---------------------------------------------------------------------------


def test_ou_stationary_variance_heat_only():
    # u = 0, forcing one coefficient: scalar OU with variance
    # nu psi^2 / (2 nu |k|^2) = psi^2 / (2 |k|^2), independent of nu
    N = 4
    t = mode_table(N)
    i = t.index[(0, 1, "cos")]
    noise = unit_noise(N, [((0, 1), "cos", 1.0)])
    for nu in (1.0, 0.1, 0.01):
        Q = lyapunov_covariance(generator(None, nu, N), noise)
        expected = np.zeros_like(Q.matrix)
        expected[i, i] = 0.5
        assert np.allclose(Q.matrix, expected, atol=1e-12)


def test_ou_variance_higher_mode_and_fractional():
    N = 4
    t = mode_table(N)
    noise = unit_noise(N, [((1, 1), "sin", 2.0)])
    Q = lyapunov_covariance(generator(None, 0.3, N), noise)
    i = t.index[(1, 1, "sin")]
    assert Q.matrix[i, i] == pytest.approx(4.0 / (2.0 * 2.0), rel=1e-12)
    # fractional dissipation s = 1/2: rate |k|^{2s} = sqrt(2)
    Qf = lyapunov_covariance(generator(None, 0.3, N, s=0.5), noise)
    assert Qf.matrix[i, i] == pytest.approx(4.0 / (2.0 * math.sqrt(2.0)), rel=1e-12)


def test_zero_noise_gives_zero_covariance(shear):
    N = 4
    noise = NoiseSpec(N, np.zeros(mode_table(N).size))
    Q = lyapunov_covariance(generator(shear, 0.2, N), noise)
    assert np.all(Q.matrix == 0.0)


def test_lyapunov_rejects_inviscid(shear):
    noise = unit_noise(4, [((0, 1), "cos", 1.0)])
    with pytest.raises(ValueError, match="nu > 0"):
        lyapunov_covariance(generator(shear, 0.0, 4), noise)


def test_lyapunov_rejects_non_generator(shear):
    from torusmix import advection_matrix

    noise = unit_noise(4, [((0, 1), "cos", 1.0)])
    with pytest.raises(ValueError, match="generator"):
        lyapunov_covariance(advection_matrix(shear, 4), noise)


def test_shear_block_decoupling(shear):
    # generator is block diagonal in k1, so mixed forcing cannot correlate
    # the x-independent block with the rest
    N = 6
    t = mode_table(N)
    noise = unit_noise(N, [((0, 1), "cos", 1.0), ((2, 1), "cos", 1.0)])
    Q = lyapunov_covariance(generator(shear, 0.1, N), noise)
    onaxis = np.flatnonzero(t.k1 == 0)
    rest = np.flatnonzero(t.k1 != 0)
    cross = Q.matrix[np.ix_(onaxis, rest)]
    assert np.max(np.abs(cross)) < 1e-12


def test_lyapunov_residual_certificate(cellular, rng):
    N = 6
    noise = NoiseSpec(N, np.abs(random_field(N, rng).coeffs))
    A = generator(cellular, 0.07, N)
    Q = lyapunov_covariance(A, noise)
    res = A.dense() @ Q.matrix + Q.matrix @ A.dense().T + 0.07 * np.diag(noise.amps**2)
    bound = 1e-10 * (
        np.linalg.norm(A.dense(), "fro") * np.linalg.norm(Q.matrix, "fro")
        + 0.07 * noise.total_intensity
    )
    assert np.linalg.norm(res, "fro") <= bound
    assert Q.meta["residual_fro"] <= bound


def test_psd_and_norm_bound(shear, cellular, rng):
    # min eigenvalue >= -1e-10 ||Q||_op and ||Q||_op <= ||Psi||^2 / (2 lambda_1)
    for flow, nu in ((shear, 0.2), (cellular, 0.05)):
        noise = NoiseSpec(6, np.abs(random_field(6, rng).coeffs))
        Q = lyapunov_covariance(generator(flow, nu, 6), noise)
        assert Q.min_eigenvalue() >= -1e-10 * Q.operator_norm
        assert Q.operator_norm <= noise.total_intensity / 2.0 + 1e-9


# ---------------------------------------------------------------------------
# quadrature oracle
# ---------------------------------------------------------------------------


def test_quadrature_single_mode_closed_form():
    # u = 0, one forced mode: nu int_0^T e^{-2 nu |k|^2 t} dt in closed form
    N = 3
    t = mode_table(N)
    i = t.index[(0, 2, "cos")]
    nu, lam, psi = 0.25, 4.0, 1.5
    noise = unit_noise(N, [((0, 2), "cos", psi)])
    A = generator(None, nu, N)
    prev = 0.0
    for T in (1.0, 4.0, 16.0):
        Q = covariance_by_quadrature(A, noise, T=T, h=0.001)
        exact = psi**2 / (2 * lam) * (1.0 - math.exp(-2 * nu * lam * T))
        assert Q.matrix[i, i] == pytest.approx(exact, rel=1e-6)
        assert Q.matrix[i, i] > prev  # converges upward in T
        prev = Q.matrix[i, i]


def test_quadrature_zero_noise(shear):
    noise = NoiseSpec(4, np.zeros(mode_table(4).size))
    Q = covariance_by_quadrature(generator(shear, 0.5, 4), noise, T=10.0, h=0.01)
    assert np.all(Q.matrix == 0.0)


def test_quadrature_agrees_with_lyapunov_mixed_forcing(shear):
    # mixed forcing: step chosen so the composite-trapezoid error
    # ~ (2 nu |k|^2 h)^2 / 12 stays below the 1e-6 target
    N = 6
    nu = 0.5
    noise = unit_noise(N, [((0, 1), "cos", 1.0), ((1, 1), "cos", 1.0)])
    A = generator(shear, nu, N)
    Ql = lyapunov_covariance(A, noise)
    Qq = covariance_by_quadrature(A, noise, T=40 / nu, h=0.002)
    dist = np.linalg.norm(Ql.matrix - Qq.matrix, "fro")
    assert dist <= 1e-6 * np.linalg.norm(Ql.matrix, "fro")
    assert Qq.meta["tail_bound"] < 1e-30


# ---------------------------------------------------------------------------
# shear limit covariance
# ---------------------------------------------------------------------------


def test_shear_limit_values():
    N = 4
    t = mode_table(N)
    noise = unit_noise(N, [((0, 1), "cos", 1.0)])
    Q0 = shear_limit_covariance(noise)
    assert Q0.matrix[t.index[(0, 1, "cos")], t.index[(0, 1, "cos")]] == 0.5
    assert np.count_nonzero(Q0.matrix) == 1

    noise3 = unit_noise(N, [((0, 3), "cos", 2.0)])
    Q3 = shear_limit_covariance(noise3)
    assert Q3.matrix[t.index[(0, 3, "cos")], t.index[(0, 3, "cos")]] == pytest.approx(2.0 / 9.0)


def test_shear_limit_vanishes_for_x_dependent_forcing():
    # forcing only x-dependent modes: the limit measure degenerates to zero
    noise = unit_noise(4, [((1, 1), "cos", 1.0), ((2, -1), "sin", 0.7)])
    Q0 = shear_limit_covariance(noise)
    assert np.all(Q0.matrix == 0.0)


def test_exact_block_identity_shear_pure_axis_forcing(shear):
    # forcing on k1 = 0 only: Q_nu equals the limit exactly for every nu
    N = 6
    noise = unit_noise(N, [((0, 1), "cos", 1.0), ((0, 2), "sin", 0.5)])
    Q0 = shear_limit_covariance(noise)
    for nu in (0.2, 0.1, 0.05, 0.025):
        Q = lyapunov_covariance(generator(shear, nu, N), noise)
        assert covariance_distance(Q, Q0) < 1e-12


def test_distance_to_limit_decreases_with_nu(shear):
    N = 8
    noise = unit_noise(N, [((0, 1), "cos", 1.0), ((1, 1), "cos", 1.0)])
    Q0 = shear_limit_covariance(noise)
    dists = [
        covariance_distance(lyapunov_covariance(generator(shear, nu, N), noise), Q0)
        for nu in (0.2, 0.1, 0.05, 0.025)
    ]
    assert all(a > b for a, b in zip(dists, dists[1:]))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def test_h1_trace_balance_every_flow(shear, cellular):
    # tr(diag(|k|^2) Q) = ||Psi||^2 / 2 exactly in the Galerkin system
    noise = unit_noise(6, [((1, 1), "sin", 1.0)])
    for flow in (None, shear, cellular):
        for nu in (0.5, 0.05):
            Q = lyapunov_covariance(generator(flow, nu, 6), noise)
            assert h1_trace(Q) == pytest.approx(0.5, abs=1e-9)


def test_h1_trace_trivial_and_limit():
    N = 4
    noise = unit_noise(N, [((0, 1), "cos", 1.0)])
    zero = shear_limit_covariance(NoiseSpec(N, np.zeros(mode_table(N).size)))
    assert h1_trace(zero) == 0.0
    Q0 = shear_limit_covariance(noise)
    assert h1_trace(Q0) == pytest.approx(0.5)


def test_block_operator_norm_selectors():
    N = 4
    noise = unit_noise(N, [((0, 1), "cos", 1.0)])
    Q0 = shear_limit_covariance(noise)
    assert block_operator_norm(Q0, "all") == pytest.approx(0.5)
    assert block_operator_norm(Q0, "k1-nonzero") == 0.0
    assert block_operator_norm(Q0, lambda k1, k2, parity: k1 == 0) == pytest.approx(0.5)


def test_offblock_norm_decreases_with_nu(shear):
    N = 8
    noise = unit_noise(N, [((0, 1), "cos", 1.0), ((1, 1), "cos", 1.0)])
    vals = [
        block_operator_norm(
            lyapunov_covariance(generator(shear, nu, N), noise), "k1-nonzero"
        )
        for nu in (0.2, 0.1, 0.05, 0.025)
    ]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_covariance_distance_basics(shear):
    noise = unit_noise(4, [((0, 1), "cos", 1.0)])
    Q = lyapunov_covariance(generator(shear, 0.1, 4), noise)
    assert covariance_distance(Q, Q) == 0.0
    other = shear_limit_covariance(unit_noise(6, [((0, 1), "cos", 1.0)]))
    with pytest.raises(ValueError, match="match"):
        covariance_distance(Q, other)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def test_covariance_export_round_trip(shear):
    noise = unit_noise(4, [((0, 1), "cos", 1.0), ((1, 0), "sin", 0.3)])
    Q = lyapunov_covariance(generator(shear, 0.1, 4), noise)
    buf = io.StringIO()
    write_covariance(Q, buf)
    buf.seek(0)
    R = read_covariance(buf)
    assert R.N == Q.N
    assert np.array_equal(R.matrix, Q.matrix)
    assert R.provenance == Q.provenance


def test_eigenvalue_summary_descending(shear):
    noise = unit_noise(4, [((0, 1), "cos", 1.0)])
    Q = lyapunov_covariance(generator(shear, 0.1, 4), noise)
    eigs = eigenvalue_summary(Q)
    assert np.all(np.diff(eigs) <= 0)
    assert eigs[0] == pytest.approx(0.5)
