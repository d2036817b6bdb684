import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from damplab.damping import DampingProfile, sample_on_grid
from damplab.grid import CircleGrid
from damplab.multipliers import (build_weights, case_mask, certify_point, check_b_identity, check_lemma_fuwfu,
                                 check_lemma_mu, check_psi, check_wu, chi, elem_implication, elem_premise,
                                 energy_F, eta_schedule, forcing, psi_default_dd, layer_bound_gap, min_layers, mu, psi_default,
                                 psi_dominance_constant, weight_b)
from damplab.rng import complex_gaussian
from damplab.stationary import build_operator, solve

HALF_PI = math.pi / 2
P0 = DampingProfile.exact(HALF_PI, 0)


def test_mu_chi_values():
    q = 16
    assert mu(HALF_PI + 0.125, q, P0) == pytest.approx(4.0)
    assert mu(0.0, q, P0) == 1 and mu(math.pi, q, P0) == 1
    assert chi(HALF_PI, q, P0) == 0
    assert chi(HALF_PI + 0.25, q, P0) == pytest.approx(1.0)
    assert chi(HALF_PI + 0.125, q, P0) == pytest.approx(0.5)
    assert chi(-HALF_PI - 0.125, q, P0) == pytest.approx(0.5)


def test_weight_b_M_formula():
    # sigma = pi/2, tau = 3, q^-delta = 0.1  =>  M = (tau + 1 - 0.1)/(pi - tau)
    g = CircleGrid(4096)
    bw = weight_b(g, 100.0, P0, tau=3.0)
    assert bw.M == pytest.approx(27.544, abs=1e-3)
    assert bw.M == pytest.approx((3.0 + 1 - 0.1) / (math.pi - 3.0), rel=1e-14)
    assert abs(bw.integral_bprime) <= 1e-12
    assert bw.bprime[g.n // 2] == 1.0  # x = 0
    assert abs(bw.b[0]) <= 1e-12  # b(-pi) = 0 = b(pi)


def test_weight_b_rejects_wide_layer():
    with pytest.raises(ValueError):
        weight_b(CircleGrid(64), 1.1, P0, tau=HALF_PI + 0.1)


@settings(max_examples=40)
@given(st.floats(0.3, 2.8), st.floats(0, 5), st.floats(16, 5000), st.floats(0.2, 0.8))
def test_weight_b_properties(sigma, beta, q, t):
    p = DampingProfile.exact(sigma, beta)
    layer = q ** -p.delta
    tau = sigma + layer + t * (math.pi - sigma - layer)
    if not sigma + layer < tau < math.pi:
        return
    g = CircleGrid(512)
    bw = weight_b(g, q, p, tau)
    assert abs(bw.integral_bprime) <= 1e-12 * max(1.0, bw.M)
    # b' on nodes away from breakpoints matches the piecewise definition
    ax = np.abs(g.nodes)
    breaks = np.array([sigma, sigma + layer, tau])
    away = np.min(np.abs(ax[:, None] - breaks[None, :]), axis=1) > 1e-9
    want = np.select([ax < sigma, ax <= sigma + layer, ax <= tau], [1.0, q**p.delta, 1.0], -bw.M)
    np.testing.assert_array_equal(bw.bprime[away], want[away])
    # b is continuous: its node increments match h b' up to the breakpoint cells
    jumps = np.abs(np.diff(bw.b))
    assert np.max(jumps) <= g.h * max(q**p.delta, bw.M) * (1 + 1e-9)


@settings(max_examples=40)
@given(st.floats(0.3, 2.8), st.floats(0, 8), st.floats(2, 1e4))
def test_mu_chi_consistency(sigma, beta, q):
    p = DampingProfile.exact(sigma, beta)
    x = np.linspace(-math.pi, math.pi, 2001)
    m, c = mu(x, q, p), chi(x, q, p)
    assert np.all(m >= 1)
    assert np.all((c >= 0) & (c <= 1))
    slope = np.abs(np.diff(c)) > 0
    mid = (x[1:] + x[:-1]) / 2
    assert np.all(np.isclose(mu(mid[slope], q, p), q**p.delta) | (np.abs(np.abs(mid[slope]) - sigma) < 2e-3)
                  | (np.abs(np.abs(mid[slope]) - sigma - q**-p.delta) < 2e-3))
    assert layer_bound_gap(CircleGrid(1024), q, p) <= 1e-12


def test_eta_examples():
    s = eta_schedule(0)
    assert s.N == 0 and s.eta == (0.5,)
    s = eta_schedule(20)
    assert s.N == 1
    assert s.eta[0] == pytest.approx(1 / 22, rel=1e-15) and s.eta[1] == pytest.approx(0.75 / 22, rel=1e-15)
    assert min_layers(12) == 0 and min_layers(12.0001) == 1 and min_layers(48) == 1 and min_layers(49) == 2
    with pytest.raises(ValueError):
        eta_schedule(20, N=0)
    with pytest.raises(ValueError):
        eta_schedule(-1)


@given(st.floats(0, 500), st.integers(0, 3))
def test_eta_recurrences(beta, extra):
    s = eta_schedule(beta, min_layers(beta) + extra)
    eta, N = s.eta, s.N
    delta = 1 / (beta + 2)
    assert eta[0] == pytest.approx(delta, rel=1e-15)
    assert all(a > b > 0 for a, b in zip(eta, eta[1:])) and eta[-1] > 0
    for j in range(N - 1):
        assert abs(3 * eta[j] - 4 * eta[j + 1] + eta[j + 2]) <= 1e-14
    if N >= 1:
        assert abs(3 * eta[N - 1] - 4 * eta[N]) <= 1e-14


def test_energy_F():
    g = CircleGrid(32)
    x = g.nodes
    np.testing.assert_allclose(energy_F(np.exp(1j * x), 0, g), 1, atol=1e-12)
    np.testing.assert_allclose(energy_F(np.full(32, 1 - 2j), 2, g), 10, atol=1e-12)
    np.testing.assert_allclose(energy_F(np.sin(x), 1, g), 1, atol=1e-12)
    with pytest.raises(ValueError):
        energy_F(np.ones(31), 1, g)


def _solve(q, E, profile, f, n=512):
    g = CircleGrid(n, "fd2")
    return solve(build_operator(q, E, sample_on_grid(profile, g), g), f(g)), g


def test_check_wu_trivial():
    s, _ = _solve(16, 5, P0, lambda g: np.zeros(g.n))
    r = check_wu(s)
    assert r.lhs == r.rhs == 0 and r.passed
    s, g = _solve(16, 5.5, DampingProfile.exact(1.0, 0, c0=1), lambda g: complex_gaussian(g.n, 1))
    assert check_wu(s).passed


def test_check_wu_beta1_q64():
    p = DampingProfile.exact(HALF_PI, 1)
    s, _ = _solve(64, 64.0**2, p, lambda g: complex_gaussian(g.n, 2))
    r = check_wu(s, 1.0)
    assert r.slack >= -1e-12 * r.rhs and r.passed


def test_zero_forcing_ratios_pass():
    s, g = _solve(16, 256, P0, lambda g: np.zeros(g.n))
    w = build_weights(g, 16, P0)
    for r in (check_psi(s, P0, w.psi), check_lemma_mu(s, w), check_lemma_fuwfu(s, w)):
        assert r.lhs == 0 and r.rhs == 0 and r.passed and r.ratio == 0


def test_psi_support():
    g = CircleGrid(1024)
    psi = psi_default(g.nodes, P0)
    a = HALF_PI + (math.pi - HALF_PI) / 4
    assert np.all(psi[np.abs(g.nodes) <= a] == 0) and psi.max() == pytest.approx(1.0)
    assert math.isfinite(psi_dominance_constant(g, P0))
    np.testing.assert_allclose(psi_default_dd(g.nodes, P0), g.diff2(psi), atol=1e-6 * np.abs(g.diff2(psi)).max())
    s, _ = _solve(16, 256, P0, lambda g: complex_gaussian(g.n, 3), n=1024)
    with pytest.raises(ValueError, match="ψ support"):
        check_psi(s, P0, np.ones(g.n))


def test_psi_lhs_zero_when_u_outside_support():
    g = CircleGrid(2048)
    x = g.nodes
    u = np.where(np.abs(x) < 1.0, np.exp(1 - 1 / (1 - np.minimum(x * x, 0.999999))), 0)
    psi = psi_default(g.nodes, P0)
    du2 = np.abs(g.diff(u)) ** 2
    assert g.integrate(psi * du2).real <= 1e-10 * g.integrate(du2).real


def test_fuwfu_case1_term_vanishes():
    g = CircleGrid(1024, "fd2")
    f = forcing(g, 32, P0, "1", seed=1)
    Wchi = sample_on_grid(P0, g) * chi(g.nodes, 32, P0)
    assert np.all(Wchi * f == 0)


def test_lemma_mu_E0_drops_term():
    s, g = _solve(16, 0.0, P0, lambda g: complex_gaussian(g.n, 4))
    w = build_weights(g, 16, P0)
    r = check_lemma_mu(s, w)
    up = g.diff(s.u, "fourier")
    assert r.lhs == pytest.approx(g.integrate(w.mu * np.abs(up) ** 2).real, rel=1e-12)


def test_b_identity_check_runs():
    s, g = _solve(32, 1024, P0, lambda g: complex_gaussian(g.n, 5), n=1024)
    r = check_b_identity(s, build_weights(g, 32, P0))
    assert math.isfinite(r.ratio)


def test_case_masks_partition_damped_side():
    g = CircleGrid(4096)
    p = DampingProfile.exact(HALF_PI, 0)
    m1 = case_mask(g, 64, p, "1", N=1)
    m4 = case_mask(g, 64, p, "4", N=1)
    assert np.all(m1 == (np.abs(g.nodes) <= HALF_PI))
    assert not np.any(m1 & m4)
    with pytest.raises(ValueError):
        case_mask(g, 64, p, "3", N=0)
    with pytest.raises(ValueError):
        case_mask(g, 64, p, "5")


def test_certify_point_rows():
    reps = certify_point(32, 1024, P0, CircleGrid(256, "fd2"), "2", seed=0, N=1)
    assert [r.lemma for r in reps] == ["wu", "psi", "lemma_mu", "lemma_fuwfu"]
    row = reps[0].row()
    assert list(row) == ["lemma", "q", "E", "beta", "case", "lhs", "rhs", "ratio", "pass"]


def test_elem_examples():
    assert elem_implication(1, 2, 3, 1, 0, 1.0)  # theta = 1: identical statements
    assert elem_implication(0.5, 0, 1, 1, 1, 0.3)  # b = 0
    with pytest.raises(ValueError):
        elem_implication(-1, 0, 0, 0, 0, 0.5)
    with pytest.raises(ValueError):
        elem_implication(1, 1, 1, 1, 1, 0.0)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.floats(0, 10), st.floats(0, 1e3), st.floats(0, 1e3),
       st.floats(0.01, 1.0))
def test_elem_premise_implies_conclusion(a, b, c, d, e, theta):
    if elem_premise(a, b, c, d, e, theta):
        assert elem_implication(a, b, c, d, e, theta)
