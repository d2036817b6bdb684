"""Multiplier weights and numerical certificates for the stationary estimates.

Each ``check_*`` evaluates both sides of one inequality on a computed solve and
returns a CheckReport. Inequalities with implicit constants report the ratio
lhs/rhs; whether the ratio stays bounded is decided across a q-sweep, not here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import rng
from .damping import DampingProfile, eval_V, sample_on_grid
from .grid import CircleGrid
from .stationary import StationarySolve, build_operator, solve

WU_SLACK = 1e-12
ELEM_SLACK = 1e-12


def mu(x, q: float, profile: DampingProfile):
    """q^delta on the transition layer sigma <= |x| <= sigma + q^-delta, 1 elsewhere."""
    d = profile.delta
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.where((ax >= profile.sigma) & (ax <= profile.sigma + q**-d), q**d, 1.0)
    return out if out.ndim else float(out)


def chi(x, q: float, profile: DampingProfile):
    """0 on |x| <= sigma, linear ramp q^delta(|x| - sigma) across the layer, 1 beyond."""
    d = profile.delta
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.clip(q**d * (ax - profile.sigma), 0.0, 1.0)
    return out if out.ndim else float(out)


def psi_default(x, profile: DampingProfile):
    """C-infinity bump exp(1 - 1/(1-s^2)) centred at x = pi.

    Supported where |x| > sigma + (pi - sigma)/4; s is the distance to pi rescaled
    to the support half-width, so psi(pi) = 1.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    a = profile.sigma + (np.pi - profile.sigma) / 4
    s = (np.pi - ax) / (np.pi - a)
    inside = s < 1
    s2 = np.where(inside, s * s, 0.0)
    out = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - s2)), 0.0)
    return out if out.ndim else float(out)


def psi_default_dd(x, profile: DampingProfile):
    """Second derivative of psi_default, in closed form."""
    ax = np.abs(np.asarray(x, dtype=float))
    a = profile.sigma + (np.pi - profile.sigma) / 4
    L = np.pi - a
    s = (np.pi - ax) / L
    inside = s < 1
    s2 = np.where(inside, s * s, 0.0)
    r = 1.0 - s2
    psi = np.where(inside, np.exp(1.0 - 1.0 / r), 0.0)
    out = np.where(inside, psi * (4 * s2 - 2 * r * r - 8 * s2 * r) / r**4 / L**2, 0.0)
    return out if out.ndim else float(out)


def psi_dominance_constant(grid: CircleGrid, profile: DampingProfile, psi=None) -> float:
    """Smallest C with |psi''| + |psi| <= C W at the grid nodes (inf if psi leaks past supp W).

    The default bump uses its exact second derivative; other samples are
    differentiated spectrally.
    """
    if psi is None:
        psi = psi_default(grid.nodes, profile)
        dd = psi_default_dd(grid.nodes, profile)
    else:
        psi = np.asarray(psi)
        dd = grid.diff2(psi, "fourier")
    W = sample_on_grid(profile, grid)
    lhs = np.abs(dd) + np.abs(psi)
    mask = lhs > 1e-13 * lhs.max()
    if np.any(mask & (W <= 0)):
        return math.inf
    return float(np.max(lhs[mask] / W[mask])) if np.any(mask) else 0.0


@dataclass(frozen=True)
class BWeight:
    b: np.ndarray
    bprime: np.ndarray
    M: float
    integral_bprime: float  # exact integral of the piecewise b' over the circle


def weight_b(grid: CircleGrid, q: float, profile: DampingProfile, tau: float | None = None) -> BWeight:
    """Piecewise-linear periodic multiplier b with slope 1, q^delta, 1, -M on successive |x| ranges."""
    sigma, d = profile.sigma, profile.delta
    tau = (sigma + np.pi) / 2 if tau is None else tau
    layer = q**-d
    if not sigma + layer < tau < np.pi:
        raise ValueError(f"need sigma + q^-delta < tau < pi; got layer end {sigma + layer:.4f}, tau {tau:.4f}")
    M = (tau + 1 - layer) / (np.pi - tau)
    ax = np.abs(grid.nodes)
    bp = np.select([ax < sigma, ax <= sigma + layer, ax <= tau], [1.0, q**d, 1.0], -M)

    def B(s):  # integral of b' from 0 to s >= 0
        return np.select(
            [s <= sigma, s <= sigma + layer, s <= tau],
            [s, sigma + q**d * (s - sigma), sigma + 1 + (s - sigma - layer)],
            sigma + 1 + (tau - sigma - layer) - M * (s - tau),
        )

    b = np.sign(grid.nodes) * B(ax)
    integral = 2 * (sigma + layer * q**d + (tau - sigma - layer) - M * (np.pi - tau))
    return BWeight(b, bp, float(M), float(integral))


@dataclass(frozen=True)
class EtaSchedule:
    N: int
    eta: tuple[float, ...]


def min_layers(beta: float) -> int:
    N = 0
    while beta > 6 * (3 ** (N + 1) - 1):
        N += 1
    return N


def eta_schedule(beta: float, N: int | None = None) -> EtaSchedule:
    """Decreasing exponents eta_k = delta (3^{N+1} - 3^k)/(3^{N+1} - 1), k = 0..N.

    N defaults to the smallest layer count with beta <= 6(3^{N+1} - 1); a larger N
    is accepted and yields more annuli.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    n_min = min_layers(beta)
    if N is None:
        N = n_min
    elif N < n_min:
        raise ValueError(f"N={N} violates beta <= 6(3^(N+1)-1); need N >= {n_min}")
    delta = 1.0 / (beta + 2.0)
    top = 3 ** (N + 1)
    return EtaSchedule(N, tuple(delta * (top - 3**k) / (top - 1) for k in range(N + 1)))


@dataclass(frozen=True)
class MultiplierWeights:
    q: float
    delta: float
    tau: float
    mu: np.ndarray
    chi: np.ndarray
    b: np.ndarray
    bprime: np.ndarray
    M: float
    psi: np.ndarray
    eta: tuple[float, ...]
    N: int


def build_weights(grid: CircleGrid, q: float, profile: DampingProfile, tau: float | None = None,
                  N: int | None = None) -> MultiplierWeights:
    tau = (profile.sigma + np.pi) / 2 if tau is None else tau
    bw = weight_b(grid, q, profile, tau)
    sched = eta_schedule(profile.beta, N)
    x = grid.nodes
    return MultiplierWeights(q, profile.delta, tau, mu(x, q, profile), chi(x, q, profile), bw.b, bw.bprime,
                             bw.M, psi_default(x, profile), sched.eta, sched.N)


def energy_F(u, E: float, grid: CircleGrid) -> np.ndarray:
    """|u'|^2 + E|u|^2 at the nodes, with the spectral derivative."""
    u = np.asarray(u)
    up = grid.diff(u, "fourier")
    return np.abs(up) ** 2 + E * np.abs(u) ** 2


@dataclass(frozen=True)
class CheckReport:
    lemma: str
    q: float
    E: float
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    beta: float = math.nan
    case: str = ""
    slack: float = math.nan
    diff_scheme: str = "fourier"

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in ("lemma", "q", "E", "beta", "case", "lhs", "rhs", "ratio")} | {"pass": self.passed}


def _ratio(lhs, rhs):
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def _integrals(s: StationarySolve):
    g = s.grid
    up = g.diff(s.u, "fourier")
    fu = g.integrate(np.abs(s.f * s.u)).real
    return g, up, fu


def check_wu(s: StationarySolve, beta: float = math.nan, case: str = "") -> CheckReport:
    """int W|u|^2 <= q^-1 int |f u|."""
    g = s.grid
    lhs = float(g.integrate(s.W * np.abs(s.u) ** 2).real)
    fu = float(g.integrate(np.abs(s.f * s.u)).real)
    if s.q > 0:
        rhs = fu / s.q
    else:
        rhs = math.inf if fu > 0 else 0.0
    slack = rhs - lhs
    passed = slack >= -WU_SLACK * rhs if math.isfinite(rhs) else True
    return CheckReport("wu", s.q, s.E, lhs, rhs, _ratio(lhs, rhs), passed, beta, case, slack)


def check_psi(s: StationarySolve, profile: DampingProfile, psi=None, case: str = "") -> CheckReport:
    """int psi|u'|^2 against (1 + max(0,E)/q) int |f u|."""
    g, up, fu = _integrals(s)
    psi = psi_default(g.nodes, profile) if psi is None else np.asarray(psi, float)
    if np.any(np.abs(psi[np.abs(g.nodes) <= profile.sigma]) > 0):
        raise ValueError("ψ support check failure: psi must vanish on a neighbourhood of [-sigma, sigma]")
    lhs = float(g.integrate(psi * np.abs(up) ** 2).real)
    rhs = (1 + max(0.0, s.E) / s.q) * fu
    ratio = _ratio(lhs, rhs)
    return CheckReport("psi", s.q, s.E, lhs, rhs, ratio, math.isfinite(ratio), profile.beta, case)


def check_lemma_mu(s: StationarySolve, w: MultiplierWeights, beta: float = math.nan, case: str = "") -> CheckReport:
    """int mu|u'|^2 + E mu|u|^2 against int |f|^2 + q int W|u u'|."""
    g, up, _ = _integrals(s)
    lhs = float(g.integrate(w.mu * np.abs(up) ** 2).real + s.E * g.integrate(w.mu * np.abs(s.u) ** 2).real)
    rhs = float(g.integrate(np.abs(s.f) ** 2).real + s.q * g.integrate(s.W * np.abs(s.u) * np.abs(up)).real)
    ratio = _ratio(lhs, rhs)
    return CheckReport("lemma_mu", s.q, s.E, lhs, rhs, ratio, math.isfinite(ratio), beta, case)


def check_lemma_fuwfu(s: StationarySolve, w: MultiplierWeights, beta: float = math.nan,
                      case: str = "") -> CheckReport:
    """Same left side as check_lemma_mu against
    (1 + q^{2 delta}/E) int |f|^2 + q^{1/2} (int |f u|)^{1/2} (int |W chi f u|)^{1/2}."""
    if s.E < 1:
        raise ValueError("check_lemma_fuwfu needs E >= 1")
    g, up, fu = _integrals(s)
    lhs = float(g.integrate(w.mu * np.abs(up) ** 2).real + s.E * g.integrate(w.mu * np.abs(s.u) ** 2).real)
    wchifu = float(g.integrate(np.abs(s.W * w.chi * s.f * s.u)).real)
    rhs = float((1 + s.q ** (2 * w.delta) / s.E) * g.integrate(np.abs(s.f) ** 2).real
                + math.sqrt(s.q) * math.sqrt(fu) * math.sqrt(wchifu))
    ratio = _ratio(lhs, rhs)
    return CheckReport("lemma_fuwfu", s.q, s.E, lhs, rhs, ratio, math.isfinite(ratio), beta, case)


def check_b_identity(s: StationarySolve, w: MultiplierWeights, beta: float = math.nan, case: str = "") -> CheckReport:
    """Integrated multiplier identity for (bF)':

        int b'F = 2 Re int b f conj(u') - 2 q Re int i b W u conj(u').

    Holds exactly for the continuous problem; on the grid it carries quadrature
    error from the jumps of b', so the ratio is 1 only up to O(h).
    """
    g = s.grid
    up = g.diff(s.u, "fourier")
    lhs = float(g.integrate(w.bprime * energy_F(s.u, s.E, g)).real)
    rhs = float(2 * g.integrate(w.b * s.f * np.conj(up)).real
                - 2 * s.q * g.integrate(1j * w.b * s.W * s.u * np.conj(up)).real)
    ratio = _ratio(lhs, rhs)
    return CheckReport("b_identity", s.q, s.E, lhs, rhs, ratio, math.isfinite(ratio), beta, case)


def elem_implication(a, b, c, d, e, theta):
    """Whether a + theta b <= theta c^{1/theta} d + e holds (1e-12 relative slack).

    The premise a + b <= c b^{1-theta} d^theta + e implies it by Young's inequality.
    Works elementwise on arrays.
    """
    a, b, c, d, e, theta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, d, e, theta)))
    if np.any(np.stack([a, b, c, d, e]) < 0):
        raise ValueError("elem_implication needs a, b, c, d, e >= 0")
    if np.any((theta <= 0) | (theta > 1)):
        raise ValueError("theta must lie in (0, 1]")
    with np.errstate(over="ignore"):  # c^{1/theta} = inf only makes the bound easier
        rhs = theta * c ** (1 / theta) * d + e
    out = a + theta * b <= rhs * (1 + ELEM_SLACK)
    return out if out.ndim else bool(out)


def elem_premise(a, b, c, d, e, theta):
    a, b, c, d, e, theta = (np.asarray(v, dtype=float) for v in (a, b, c, d, e, theta))
    return a + b <= c * b ** (1 - theta) * d**theta + e


CASES = ("1", "2", "3", "4")


def case_mask(grid: CircleGrid, q: float, profile: DampingProfile, case: str, N: int | None = None,
              j: int = 0) -> np.ndarray:
    """Nodes in one support region of the case analysis.

    1: |x| <= sigma; 2: the layer [sigma, sigma + q^-delta];
    3: the annulus [sigma + q^-eta_j, sigma + q^-eta_{j+1}] (needs N >= 1);
    4: |x| >= sigma + q^-eta_N.
    """
    ax = np.abs(grid.nodes)
    sigma = profile.sigma
    eta = eta_schedule(profile.beta, N).eta
    if case == "1":
        return ax <= sigma
    if case == "2":
        return (ax >= sigma) & (ax <= sigma + q**-profile.delta)
    if case == "3":
        if len(eta) < 2:
            raise ValueError("case 3 is empty for N = 0; pass N >= 1")
        return (ax >= sigma + q ** -eta[j]) & (ax <= sigma + q ** -eta[j + 1])
    if case == "4":
        return ax >= sigma + q ** -eta[-1]
    if case == "all":
        return np.ones_like(ax, dtype=bool)
    raise ValueError(f"unknown case {case!r}")


def forcing(grid: CircleGrid, q: float, profile: DampingProfile, case: str, seed: int, N: int | None = None,
            stream: int = 0) -> np.ndarray:
    """Complex Gaussian forcing restricted to one support case."""
    mask = case_mask(grid, q, profile, case, N)
    if not mask.any():
        raise ValueError(f"case {case} has no grid nodes at q={q}, n={grid.n}")
    return rng.complex_gaussian(grid.n, seed, stream) * mask


def certify_point(q: float, E: float, profile: DampingProfile, grid: CircleGrid, case: str, seed: int = 0,
                  N: int | None = None) -> list[CheckReport]:
    """Solve with forcing from one support case and evaluate every certificate."""
    W = sample_on_grid(profile, grid)
    f = forcing(grid, q, profile, case, seed, N, stream=int(q) * 16 + CASES.index(case) if case in CASES else 0)
    s = solve(build_operator(q, E, W, grid), f)
    w = build_weights(grid, q, profile, N=N)
    beta = profile.beta
    out = [check_wu(s, beta, case), check_psi(s, profile, w.psi, case), check_lemma_mu(s, w, beta, case)]
    if E >= 1:
        out.append(check_lemma_fuwfu(s, w, beta, case))
    return out


def layer_bound_gap(grid: CircleGrid, q: float, profile: DampingProfile) -> float:
    """max of V(1-chi) - q^{-delta beta} over the nodes; <= 0 when the layer bound holds."""
    x = grid.nodes
    return float(np.max(eval_V(x, profile) * (1 - chi(x, q, profile))) - q ** (-profile.delta * profile.beta))
