"""Damped wave equation v_tt + W(x) v_t - (v_xx + v_yy) = 0 on the 2-torus.

Since W depends on x only, v = sum_k v_k(x, t) e^{iky} decouples into
independent 1-d problems v_k'' + W v_k' - d_x^2 v_k + k^2 v_k = 0. Each is
advanced by Strang splitting: an exact half-step of the damping
(w <- exp(-W dt/2) w pointwise), an exact rotation of every x-Fourier mode m
at frequency sqrt(m^2 + k^2), and another damping half-step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .damping import DampingProfile, sample_on_grid
from .fitting import FitResult, fit_power_law
from .grid import CircleGrid

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class WaveField:
    grid: CircleGrid
    ks: np.ndarray  # integer y-frequencies, one per row of v and w
    v: np.ndarray
    w: np.ndarray  # time derivative of v
    t: float = 0.0

    def __post_init__(self):
        ks = np.atleast_1d(np.asarray(self.ks, dtype=int))
        v = np.atleast_2d(np.asarray(self.v, dtype=complex))
        w = np.atleast_2d(np.asarray(self.w, dtype=complex))
        if v.shape != (ks.size, self.grid.n) or w.shape != v.shape:
            raise ValueError(f"mode arrays must have shape ({ks.size}, {self.grid.n})")
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    def to_physical(self, ny: int) -> tuple[np.ndarray, np.ndarray]:
        """Sample v and v_t on an (n, ny) grid with y_l = -pi + 2 pi l/ny."""
        y = -np.pi + TWO_PI * np.arange(ny) / ny
        phase = np.exp(1j * np.outer(self.ks, y))
        return np.einsum("kx,ky->xy", self.v, phase), np.einsum("kx,ky->xy", self.w, phase)


@dataclass(frozen=True)
class InitialData:
    family: str
    grid: CircleGrid
    ks: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    params: dict = field(default_factory=dict)

    @classmethod
    def gaussian_strip(cls, grid: CircleGrid, k: int, width: float) -> "InitialData":
        """v0 = exp(-x^2/(2 width^2)) e^{iky}, v1 = i sqrt(1+k^2) v0."""
        v0 = np.exp(-grid.nodes**2 / (2 * width**2)).astype(complex)
        return cls("gaussian-strip", grid, np.array([k]), v0[None, :], 1j * math.sqrt(1 + k * k) * v0[None, :],
                   {"k": int(k), "width": float(width)})

    @classmethod
    def plane_wave(cls, grid: CircleGrid, m: int, k: int) -> "InitialData":
        """v0 = e^{i(mx+ky)}, v1 = 0."""
        v0 = np.exp(1j * m * grid.nodes)
        return cls("plane-wave", grid, np.array([k]), v0[None, :], np.zeros((1, grid.n), complex),
                   {"m": int(m), "k": int(k)})

    @classmethod
    def custom(cls, grid: CircleGrid, ks, v0, v1) -> "InitialData":
        return cls("custom", grid, np.atleast_1d(ks), np.atleast_2d(v0), np.atleast_2d(v1))

    @classmethod
    def from_samples(cls, grid: CircleGrid, v0_xy, v1_xy) -> "InitialData":
        """Per-mode data from samples on an (n, ny) grid; ny fixes the retained |k| < ny/2."""
        v0_xy, v1_xy = np.asarray(v0_xy), np.asarray(v1_xy)
        ny = v0_xy.shape[1]
        ks = np.fft.fftfreq(ny, 1.0 / ny).astype(int)
        y0 = -np.pi
        # coefficient of e^{iky} with the y grid starting at -pi
        shift = np.exp(-1j * ks * y0)
        v0 = (np.fft.fft(v0_xy, axis=1) / ny * shift).T
        v1 = (np.fft.fft(v1_xy, axis=1) / ny * shift).T
        return cls("custom", grid, ks, v0, v1)

    def state(self) -> WaveField:
        return WaveField(self.grid, self.ks, self.v0.copy(), self.v1.copy(), 0.0)

    def data_norm(self) -> float:
        """||v0||_{H^2} + ||v1||_{H^1}, the normalization of the decay bound."""
        return sobolev_norm(self.grid, self.ks, self.v0, 2) + sobolev_norm(self.grid, self.ks, self.v1, 1)


def sobolev_norm(grid: CircleGrid, ks, fields, s: int) -> float:
    """(sum (1+m^2+k^2)^s |c_{m,k}|^2)^{1/2} with coefficients scaled so ||1||_{L^2} = 2 pi."""
    if s not in (0, 1, 2):
        raise ValueError("s must be 0, 1 or 2")
    ks = np.atleast_1d(ks)
    c = np.fft.fft(np.atleast_2d(fields), axis=-1) / grid.n
    weight = (1 + grid.wavenumbers[None, :] ** 2 + ks[:, None].astype(float) ** 2) ** s
    return float(TWO_PI * math.sqrt(np.sum(weight * np.abs(c) ** 2)))


def _fourier_energy(grid, ks, vh, wh) -> float:
    """2 pi * sum_k int |w_k|^2 + |d_x v_k|^2 + k^2 |v_k|^2, from FFT coefficients (Parseval)."""
    omega2 = grid.wavenumbers[None, :] ** 2 + ks[:, None].astype(float) ** 2
    dens = np.abs(wh) ** 2 + omega2 * np.abs(vh) ** 2
    return float(TWO_PI * (TWO_PI / grid.n**2) * np.sum(dens))


def energy(state: WaveField) -> float:
    """Energy of the torus field; the x-gradient uses the symbol m^2 on every mode, Nyquist included."""
    return _fourier_energy(state.grid, state.ks, np.fft.fft(state.v, axis=-1), np.fft.fft(state.w, axis=-1))


class SplitStepper:
    """Strang-splitting propagator for fixed (grid, ks, W, dt)."""

    def __init__(self, grid: CircleGrid, ks, W, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid, self.dt = grid, float(dt)
        self.ks = np.atleast_1d(np.asarray(ks, dtype=int))
        W = np.broadcast_to(np.asarray(W, dtype=float), (grid.n,))
        self.undamped = not np.any(W)
        self.half = np.exp(-W * dt / 2)
        self.full = np.exp(-W * dt)
        om = np.sqrt(grid.wavenumbers[None, :] ** 2 + self.ks[:, None].astype(float) ** 2)
        self.cos = np.cos(om * dt)
        sin = np.sin(om * dt)
        safe = np.where(om > 0, om, 1.0)
        self.sin_over = np.where(om > 0, sin / safe, dt)  # omega = 0: v += w dt
        self.minus_om_sin = -om * sin

    def _rotate(self, vh, wh):
        return self.cos * vh + self.sin_over * wh, self.minus_om_sin * vh + self.cos * wh

    def advance(self, state: WaveField, nsteps: int = 1) -> WaveField:
        if nsteps <= 0:
            return state
        vh = np.fft.fft(state.v, axis=-1)
        if self.undamped:
            wh = np.fft.fft(state.w, axis=-1)
            for _ in range(nsteps):
                vh, wh = self._rotate(vh, wh)
            w = np.fft.ifft(wh, axis=-1)
        else:
            # D/2 R D/2 D/2 R D/2 ... = D/2 R D R ... R D/2
            wh = np.fft.fft(state.w * self.half, axis=-1)
            for i in range(nsteps):
                vh, wh = self._rotate(vh, wh)
                w = np.fft.ifft(wh, axis=-1)
                if i < nsteps - 1:
                    wh = np.fft.fft(w * self.full, axis=-1)
            w = w * self.half
        return replace(state, v=np.fft.ifft(vh, axis=-1), w=w, t=state.t + nsteps * self.dt)


def step(state: WaveField, dt: float, W) -> WaveField:
    return SplitStepper(state.grid, state.ks, W, dt).advance(state, 1)


def oracle_constant_damping(c: float, omega: float, v0, w0, t):
    """Exact (v, v') for v'' + c v' + omega^2 v = 0 with v(0)=v0, v'(0)=w0.

    Roots lam+- = (-c +- sqrt(c^2 - 4 omega^2))/2. Written as
    v = v0 C(t) + (w0 + c v0/2) S(t) with C = (e^{lam+ t} + e^{lam- t})/2 and
    S = (e^{lam+ t} - e^{lam- t})/(lam+ - lam-), where S is evaluated through
    expm1 so nearly equal roots lose no digits; the double root gives S = t e^{-ct/2}.
    """
    if c < 0 or omega < 0:
        raise ValueError("need c >= 0 and omega >= 0")
    t = np.asarray(t, dtype=float)
    disc = c * c - 4 * omega * omega
    if disc >= 0:
        root = math.sqrt(disc)
        lm = (-c - root) / 2
        lp = -2 * omega * omega / (c + root) if c + root > 0 else 0.0
    else:
        root = 1j * math.sqrt(-disc)
        lm, lp = (-c - root) / 2, (-c + root) / 2
    ep, em = np.exp(lp * t), np.exp(lm * t)
    C = (ep + em) / 2
    if root == 0:  # double root at c = 2 omega
        S = t * em
    else:
        S = em * np.expm1(root * t) / root
    v = v0 * C + (w0 + c * v0 / 2) * S
    a0 = -c * w0 - omega * omega * v0  # v''(0); v' solves the same equation
    w = w0 * C + (a0 + c * w0 / 2) * S
    if np.isrealobj(v0) and np.isrealobj(w0):
        return np.real(v), np.real(w)
    return v, w


@dataclass(frozen=True)
class DecaySeries:
    t: np.ndarray
    energy: np.ndarray
    data_norm: float
    final_state: WaveField | None = None

    def is_monotone(self, rel: float = 1e-12) -> bool:
        return bool(np.all(self.energy[1:] <= self.energy[:-1] * (1 + rel)))


def run_decay(damping, data: InitialData, T: float, dt: float = 0.05, sample_stride: int = 20) -> DecaySeries:
    """Evolve ``data`` to time T, recording the energy every ``sample_stride`` steps.

    ``damping`` is a DampingProfile or W samples on the data grid.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    grid = data.grid
    W = sample_on_grid(damping, grid) if isinstance(damping, DampingProfile) else damping
    nsteps = int(round(T / dt))
    stepper = SplitStepper(grid, data.ks, W, dt)
    state = data.state()
    ts, es = [0.0], [energy(state)]
    done = 0
    while done < nsteps:
        chunk = min(sample_stride, nsteps - done)
        state = stepper.advance(state, chunk)
        done += chunk
        ts.append(done * dt)
        es.append(energy(state))
    return DecaySeries(np.array(ts), np.array(es), data.data_norm(), state)


def decay_functional(series: DecaySeries, alpha: float, t_min: float, t_max: float) -> float:
    """sup over t in [t_min, t_max] of t^alpha E(t)^{1/2} / (||v0||_{H^2} + ||v1||_{H^1})."""
    sel = (series.t >= t_min) & (series.t <= t_max)
    if not sel.any():
        raise ValueError("no samples in the requested window")
    return float(np.max(series.t[sel] ** alpha * np.sqrt(series.energy[sel])) / series.data_norm)


def fit_decay(series: DecaySeries, window: tuple[float, float] | None = None,
              alpha: float | None = None) -> FitResult:
    """Fit E(t)^{1/2} ~ C t^{-alpha} over the window (default [T/50, T/2]).

    When ``alpha`` is given, also reports the sup over the window of the
    normalized functional t^alpha E^{1/2} / data norm.
    """
    T = float(series.t[-1])
    lo, hi = window if window is not None else (T / 50, T / 2)
    if not series.t[0] <= lo < hi <= T:
        raise ValueError(f"window {(lo, hi)} outside the series range [{series.t[0]}, {T}]")
    sel = (series.t >= lo) & (series.t <= hi) & (series.t > 0)
    e = series.energy[sel]
    if np.any(e <= 0):
        raise ValueError("nonpositive energy inside the fit window")
    fit = fit_power_law(series.t[sel], np.sqrt(e))
    sup = decay_functional(series, alpha, lo, hi) if alpha is not None else None
    return FitResult(-fit.exponent, fit.prefactor, (float(lo), float(hi)), fit.max_residual, sup)
