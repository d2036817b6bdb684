import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from damplab.damping import DampingProfile, eval_V, eval_W, sample_on_grid, validate_envelope
from damplab.grid import CircleGrid

HALF_PI = math.pi / 2


@pytest.mark.parametrize("x,beta,want", [(0.0, 2, 0.0), (HALF_PI + 0.1, 2, 0.01), (math.pi, 0, 1.0)])
def test_eval_V_values(x, beta, want):
    assert eval_V(x, DampingProfile.exact(HALF_PI, beta)) == pytest.approx(want, abs=1e-15)


def test_eval_W_variants():
    assert eval_W(HALF_PI + 0.1, DampingProfile.exact(HALF_PI, 2)) == pytest.approx(0.01)
    assert eval_W(math.pi, DampingProfile.scaled(HALF_PI, 0, 2.0, 2.0)) == 2.0
    for p in (DampingProfile.exact(1.0, 1), DampingProfile.scaled(1.0, 1, 0.5, 2.0),
              DampingProfile.plateau_perturbed(1.0, 1, 0.8, 1.5)):
        assert eval_W(0.0, p) == 0.0


def test_domain_errors():
    with pytest.raises(ValueError):
        eval_V(3.2, DampingProfile.exact(1.0, 0))
    with pytest.raises(ValueError):
        eval_W(-4.0, DampingProfile.exact(1.0, 0))


@pytest.mark.parametrize("kw", [dict(sigma=0.0, beta=0), dict(sigma=math.pi, beta=0), dict(sigma=1, beta=-1),
                                dict(sigma=1, beta=0, c0=0.5)])
def test_profile_ranges(kw):
    with pytest.raises(ValueError):
        DampingProfile(**kw)


def test_scaled_range():
    with pytest.raises(ValueError):
        DampingProfile.scaled(1.0, 0, 3.0, 2.0)


def test_sample_on_grid():
    four = np.array([-math.pi, -HALF_PI, 0.0, HALF_PI])
    np.testing.assert_array_equal(eval_W(four, DampingProfile.exact(HALF_PI, 0)), [1, 0, 0, 0])
    g = CircleGrid(8)
    s = sample_on_grid(DampingProfile.exact(HALF_PI, 0), g)
    assert s.shape == (8,)
    np.testing.assert_array_equal(s, [1, 1, 0, 0, 0, 0, 0, 1])  # |x| = pi/2 stays undamped
    s1 = sample_on_grid(DampingProfile.exact(HALF_PI, 1), g)
    assert s1[7] == pytest.approx(math.pi / 4)  # node 3pi/4


def test_validate_envelope():
    g = CircleGrid(64)
    p = DampingProfile.exact(1.0, 1, c0=2.0)
    v = eval_V(g.nodes, p)
    assert validate_envelope(v, g, DampingProfile.exact(1.0, 1)).ok
    rep = validate_envelope(3 * v, g, p)
    assert not rep.ok and rep.worst_ratio == pytest.approx(1.5)
    bad = v.copy()
    bad[0] = -1e-3
    assert not validate_envelope(bad, g, p).ok
    with pytest.raises(ValueError):
        validate_envelope(v[:-1], g, p)


profiles = st.builds(
    lambda sigma, beta, c0, kind, t: (
        DampingProfile.exact(sigma, beta, c0) if kind == 0 else
        DampingProfile.scaled(sigma, beta, 1 / c0 + t * (c0 - 1 / c0), c0) if kind == 1 else
        DampingProfile.plateau_perturbed(sigma, beta, 4 * t - 2, c0)),
    st.floats(0.05, 3.0), st.floats(0, 6), st.floats(1, 4), st.integers(0, 2), st.floats(0, 1))


@given(profiles, st.lists(st.floats(-math.pi, math.pi), min_size=1, max_size=30))
def test_envelope_invariant(p, xs):
    x = np.array(xs)
    v, w = eval_V(x, p), eval_W(x, p)
    assert np.all(w >= v / p.c0 * (1 - 1e-14)) and np.all(w <= p.c0 * v * (1 + 1e-14))
    np.testing.assert_array_equal(eval_V(-x, p), v)


@given(st.floats(0.05, 3.0), st.floats(0, 6), st.floats(0, math.pi), st.floats(0, math.pi))
def test_V_monotone_in_abs_x(sigma, beta, a, b):
    p = DampingProfile.exact(sigma, beta)
    lo, hi = sorted((a, b))
    assert eval_V(lo, p) <= eval_V(hi, p)


def test_beta0_unit_jump():
    p = DampingProfile.exact(1.0, 0)
    assert eval_V(1.0, p) == 0.0 and eval_V(np.nextafter(1.0, 2.0), p) == 1.0
