"""Least-squares power-law fits on log-log data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    window: tuple[float, float]
    max_residual: float
    # sup of the normalized decay functional over the window, when requested
    sup_functional: float | None = None

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "window": list(self.window),
            "max_residual": self.max_residual,
            "sup_functional": self.sup_functional,
        }


def fit_power_law(x, y) -> FitResult:
    """Fit y = prefactor * x**exponent by least squares on (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 2:
        raise ValueError("need at least two points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ValueError("degenerate fit: all abscissae equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return FitResult(float(slope), float(np.exp(intercept)), (float(x.min()), float(x.max())), float(np.max(np.abs(resid))))


def fit_exponent(points) -> FitResult:
    """Growth exponent of a resolvent-norm sweep given as (q, norm) pairs."""
    points = list(points)
    if len(points) < 3:
        raise ValueError("fit_exponent needs at least 3 points")
    q, norm = np.array(points, dtype=float).T
    return fit_power_law(q, norm)
