"""Damping profiles W(x) on the circle, bounded above and below by the power envelope

    V(x) = 0             for |x| <= sigma
    V(x) = (|x|-sigma)^beta  for sigma < |x| <= pi

A profile W is admissible when V/c0 <= W <= c0*V pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# nodes of a periodic grid sit at -pi exactly; tolerate roundoff at the seam
_PI_TOL = 1e-12


class Variant(str, Enum):
    EXACT_V = "exact-V"
    SCALED = "scaled"
    PLATEAU_PERTURBED = "plateau-perturbed"


@dataclass(frozen=True)
class DampingProfile:
    sigma: float
    beta: float
    c0: float = 1.0
    variant: Variant = Variant.EXACT_V
    # c for "scaled", epsilon for "plateau-perturbed"; unused for exact-V
    param: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0.0 < self.sigma < np.pi:
            raise ValueError(f"sigma out of (0, π): {self.sigma}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0: {self.beta}")
        if self.c0 < 1:
            raise ValueError(f"c0 must be >= 1: {self.c0}")
        if self.variant is Variant.SCALED and not 1.0 / self.c0 <= self.param <= self.c0:
            raise ValueError(f"scaled(c) needs 1/c0 <= c <= c0, got c={self.param}, c0={self.c0}")

    @property
    def delta(self) -> float:
        """Transition-layer exponent 1/(beta+2)."""
        return 1.0 / (self.beta + 2.0)

    @classmethod
    def exact(cls, sigma: float, beta: float, c0: float = 1.0) -> "DampingProfile":
        return cls(sigma, beta, c0)

    @classmethod
    def scaled(cls, sigma: float, beta: float, c: float, c0: float) -> "DampingProfile":
        return cls(sigma, beta, c0, Variant.SCALED, c)

    @classmethod
    def plateau_perturbed(cls, sigma: float, beta: float, eps: float, c0: float) -> "DampingProfile":
        return cls(sigma, beta, c0, Variant.PLATEAU_PERTURBED, eps)


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > np.pi + _PI_TOL):
        raise ValueError("x outside [-π, π]")
    return x


def eval_V(x, profile: DampingProfile):
    """Envelope V at x in [-pi, pi]. Accepts scalars or arrays."""
    x = _check_domain(x)
    ax = np.minimum(np.abs(x), np.pi)
    inside = ax > profile.sigma
    # beta == 0 gives the indicator of |x| > sigma; the closed interval [0, sigma] stays 0
    excess = np.where(inside, ax - profile.sigma, 1.0)
    out = np.where(inside, excess**profile.beta, 0.0)
    return out if out.ndim else float(out)


def eval_W(x, profile: DampingProfile):
    """Damping W at x for the profile's variant.

    plateau-perturbed(eps) multiplies V by 1 + eps*cos(x), with the factor clipped
    to [1/c0, c0] so the envelope condition survives any eps.
    """
    v = eval_V(x, profile)
    if profile.variant is Variant.EXACT_V:
        return v
    if profile.variant is Variant.SCALED:
        return profile.param * v
    factor = np.clip(1.0 + profile.param * np.cos(np.asarray(x, dtype=float)), 1.0 / profile.c0, profile.c0)
    out = v * factor
    return out if np.ndim(out) else float(out)


def sample_on_grid(profile: DampingProfile, grid) -> np.ndarray:
    return np.asarray(eval_W(grid.nodes, profile), dtype=float)


@dataclass(frozen=True)
class EnvelopeReport:
    ok: bool
    worst_ratio: float  # largest factor by which a sample leaves [V/c0, c0*V]; 0 when inside

    def __bool__(self):
        return self.ok


def validate_envelope(samples, grid, profile: DampingProfile) -> EnvelopeReport:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {samples.shape}")
    v = eval_V(grid.nodes, profile)
    lo, hi = v / profile.c0, profile.c0 * v
    tol = 1e-14 * np.maximum(hi, 1.0)
    bad_hi = samples > hi + tol
    bad_lo = samples < lo - tol
    worst = 0.0
    if np.any(bad_hi):
        with np.errstate(divide="ignore"):
            r = np.where(hi[bad_hi] > 0, samples[bad_hi] / hi[bad_hi], np.inf)
        worst = max(worst, float(np.max(r)))
    if np.any(bad_lo):
        with np.errstate(divide="ignore"):
            r = np.where(samples[bad_lo] > 0, lo[bad_lo] / samples[bad_lo], np.inf)
        worst = max(worst, float(np.max(r)))
    return EnvelopeReport(not (np.any(bad_hi) or np.any(bad_lo)), worst)
