"""Static log-log SVG plots, written by hand so no plotting library is needed."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from xml.sax.saxutils import escape

import numpy as np

from .fitting import FitResult

WIDTH, HEIGHT = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 40, 60


@dataclass
class PlotSeries:
    x: np.ndarray
    y: np.ndarray
    beta: float
    fit: FitResult | None = None
    title: str = ""


def fraction_label(value: float) -> str:
    """'1/2' for exact small fractions, otherwise a short decimal."""
    fr = Fraction(value).limit_denominator(1000)
    if abs(float(fr) - value) < 1e-12:
        return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"
    return f"{value:.4g}"


def reference_exponent(kind: str, beta: float) -> tuple[float, str]:
    """Signed reference slope and its label for a plot kind."""
    if kind == "resolvent":
        r = Fraction(1) / (Fraction(beta).limit_denominator(1000) + 2)
        return 1.0 / (beta + 2), f"reference slope {fraction_label(float(r))}"
    if kind == "decay":
        b = Fraction(beta).limit_denominator(1000)
        a = (b + 2) / (b + 3)
        return -(beta + 2) / (beta + 3), f"reference rate t^-α, α = {fraction_label(float(a))}"
    raise ValueError(f"unknown plot kind {kind!r}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_plot(series: PlotSeries, kind: str) -> str:
    x = np.asarray(series.x, dtype=float)
    y = np.asarray(series.y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size == 0:
        raise ValueError("cannot plot an empty series")
    lx, ly = np.log10(x), np.log10(y)
    x0, x1 = math.floor(lx.min()), math.ceil(lx.max())
    y0, y1 = math.floor(ly.min()), math.ceil(ly.max())
    if x1 == x0:
        x1 += 1
    if y1 == y0:
        y1 += 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + (y1 - v) / (y1 - y0) * ph

    xlabel, ylabel = ("q", "resolvent norm") if kind == "resolvent" else ("t", "E(t)^1/2")
    slope, ref_label = reference_exponent(kind, series.beta)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<defs><clipPath id="plotarea"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if series.title:
        out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(series.title)}</text>')
    step_x = max(1, (x1 - x0) // 8)
    for d in range(x0, x1 + 1, step_x):
        X = _fmt(px(d))
        out.append(f'<line x1="{X}" y1="{TOP + ph}" x2="{X}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{TOP + ph + 18}" text-anchor="middle">1e{d}</text>')
    step_y = max(1, (y1 - y0) // 10)
    for d in range(y0, y1 + 1, step_y):
        Y = _fmt(py(d))
        out.append(f'<line x1="{LEFT - 5}" y1="{Y}" x2="{LEFT}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2})">{escape(ylabel)}</text>')

    pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(lx, ly))
    if x.size > 1:
        out.append(f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="1" '
                   'clip-path="url(#plotarea)"/>')
    if x.size <= 200:
        for a, b in zip(lx, ly):
            out.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="#1f77b4"/>')

    def segment(log_slope, log_icpt, color, dash, label, row):
        a, b = lx.min(), lx.max()
        ya, yb = log_icpt + log_slope * a, log_icpt + log_slope * b
        out.append(f'<line x1="{_fmt(px(a))}" y1="{_fmt(py(ya))}" x2="{_fmt(px(b))}" y2="{_fmt(py(yb))}" '
                   f'stroke="{color}" stroke-dasharray="{dash}" stroke-width="1.5" clip-path="url(#plotarea)"/>')
        out.append(f'<text x="{LEFT + 10}" y="{TOP + 16 * row}" fill="{color}">{escape(label)}</text>')

    if series.fit is not None:
        fit_slope = series.fit.exponent if kind == "resolvent" else -series.fit.exponent
        segment(fit_slope, math.log10(series.fit.prefactor), "#d62728", "none",
                f"fit slope {fit_slope:.3f}", 1)
    # guide line through the first data point
    segment(slope, ly[0] - slope * lx[0], "#555555", "6,4", ref_label, 2)
    out.append("</svg>")
    return "\n".join(out) + "\n"
