"""The one-dimensional stationary problem

    -u'' + i q W u - E u = f      on R/2piZ,

its resolvent norm, and the torus resolvent norm obtained by summing over
y-Fourier modes k with E = q^2 - k^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from . import rng
from .banded import CyclicTridiagonalLU, DenseLU, SingularSystemError, SparseLU
from .damping import DampingProfile, sample_on_grid
from .grid import CircleGrid

ACCEPT_RESIDUAL = 1e-10


class ConvergenceError(ArithmeticError):
    def __init__(self, msg, last_iterates=()):
        super().__init__(f"{msg}; last iterates {tuple(last_iterates)}")
        self.last_iterates = tuple(last_iterates)


def default_n(q: float, n_per_q: int = 8, n_min: int = 256) -> int:
    """Resolution rule n >= max(n_min, n_per_q * ceil(q)), rounded up to even and >= 8."""
    n = max(n_min, n_per_q * math.ceil(q), 8)
    return n + (n % 2)


@dataclass(frozen=True)
class StationaryOperator:
    """A = -diff2 + i q diag(W) - E on a CircleGrid."""

    q: float
    E: float
    W: np.ndarray
    grid: CircleGrid

    @property
    def diagonal(self) -> np.ndarray:
        return 1j * self.q * self.W - self.E

    def apply(self, u) -> np.ndarray:
        return -self.grid.diff2(u) + self.diagonal * np.asarray(u)

    def sparse(self) -> sp.csc_matrix:
        g = self.grid
        n, h2 = g.n, g.h**2
        if g.scheme == "fd2":
            stencil = {0: 2.0 / h2, 1: -1.0 / h2}
        elif g.scheme == "fd4":
            stencil = {0: 30.0 / (12 * h2), 1: -16.0 / (12 * h2), 2: 1.0 / (12 * h2)}
        else:
            raise ValueError("sparse form exists only for finite-difference schemes")
        diags, offsets = [], []
        for off, val in stencil.items():
            for o in {off, -off, off - n, n - off} if off else {0}:
                if -n < o < n:
                    diags.append(np.full(n - abs(o), val, dtype=complex))
                    offsets.append(o)
        m = sp.diags(diags, offsets, shape=(n, n), format="lil")
        m.setdiag(m.diagonal() + self.diagonal)
        return m.tocsc()

    def matrix(self) -> np.ndarray:
        """Dense matrix; the spectral case is built from the Fourier diff2 matrix."""
        if self.grid.scheme != "fourier":
            return self.sparse().toarray()
        n = self.grid.n
        d2 = self.grid.diff2(np.eye(n)).T.real
        return -d2 + np.diag(self.diagonal)

    def factorize(self):
        g = self.grid
        if g.scheme == "fd2":
            off = -1.0 / g.h**2
            return CyclicTridiagonalLU(2.0 / g.h**2 + self.diagonal, off, off)
        if g.scheme == "fd4":
            return SparseLU(self.sparse())
        return DenseLU(self.matrix())


def build_operator(q: float, E: float, W, grid: CircleGrid) -> StationaryOperator:
    W = np.asarray(W, dtype=float)
    if q < 0:
        raise ValueError("q must be >= 0")
    if W.shape != (grid.n,):
        raise ValueError(f"W has shape {W.shape}, grid has n={grid.n}")
    return StationaryOperator(float(q), float(E), W, grid)


@dataclass(frozen=True)
class StationarySolve:
    q: float
    E: float
    grid: CircleGrid
    W: np.ndarray
    f: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int = 0

    def wu_identity_gap(self) -> float:
        """|q<Wu,u> - Im<f,u>| relative to the larger side; zero in exact arithmetic."""
        g = self.grid
        lhs = self.q * g.integrate(self.W * np.abs(self.u) ** 2).real
        rhs = g.inner(self.f, self.u).imag
        scale = max(abs(lhs), abs(rhs))
        return abs(lhs - rhs) / scale if scale else 0.0


def _relative_residual(A: StationaryOperator, u, f) -> float:
    fn = np.linalg.norm(f)
    r = np.linalg.norm(A.apply(u) - f)
    return float(r / fn) if fn else float(r)


def _gmres_solve(A: StationaryOperator, f, tol, maxiter):
    g = A.grid
    n = g.n
    symbol = g.diff2_symbol() - A.E + 1j * A.q * float(np.mean(A.W))
    # keep the preconditioner invertible when E sits on an undamped eigenvalue
    floor = 1e-8 * max(1.0, float(np.max(np.abs(symbol))))
    symbol = np.where(np.abs(symbol) < floor, floor, symbol)
    op = spla.LinearOperator((n, n), matvec=A.apply, dtype=complex)
    pre = spla.LinearOperator((n, n), matvec=lambda r: np.fft.ifft(np.fft.fft(r) / symbol), dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    u, info = spla.gmres(op, f, M=pre, rtol=tol, atol=0.0, restart=min(n, 200), maxiter=maxiter,
                         callback=cb, callback_type="pr_norm")
    return u, count[0], info


def solve(A: StationaryOperator, f, tol: float = ACCEPT_RESIDUAL, maxiter: int = 50) -> StationarySolve:
    """Solve A u = f; banded LU for finite differences, preconditioned GMRES for the spectral scheme."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (A.grid.n,):
        raise ValueError(f"f has shape {f.shape}, grid has n={A.grid.n}")
    if not np.any(f):
        return StationarySolve(A.q, A.E, A.grid, A.W, f, np.zeros_like(f), 0.0)
    iters = 0
    if A.grid.scheme == "fourier":
        u, iters, info = _gmres_solve(A, f, tol * 1e-2, maxiter)
        res = _relative_residual(A, u, f)
        if res > tol:
            raise SingularSystemError(f"GMRES stalled at residual {res:.3e} after {iters} iterations (info={info})")
    else:
        lu = A.factorize()
        u = lu.solve(f)
        res = _relative_residual(A, u, f)
        if res > tol:
            # one step of iterative refinement before giving up
            u = u + lu.solve(f - A.apply(u))
            res = _relative_residual(A, u, f)
        if res > tol:
            raise SingularSystemError(f"residual {res:.3e} above {tol:.0e}", lu.smallest_pivot)
    return StationarySolve(A.q, A.E, A.grid, A.W, f, u, res, iters)


@dataclass(frozen=True)
class ResolventPoint:
    q: float
    E: float
    norm: float
    n: int
    scheme: str
    method: str
    residual: float = 0.0
    k: int | None = None

    @property
    def q_eval(self) -> float:
        """Frequency at which the norm was evaluated (differs from q inside a q-window)."""
        return math.sqrt(self.E + self.k**2) if self.k is not None else self.q


def _inverse_iteration(lu, n, tol, max_iter, seed, block=3):
    """Largest eigenvalue of (A^H A)^{-1} by blocked inverse iteration.

    A block with Rayleigh-Ritz instead of a single vector: for even W the even and
    odd sectors carry nearly equal smallest singular values, which stalls plain
    power iteration.
    """
    block = min(block, n)
    V = np.stack([rng.complex_gaussian(n, seed, stream=j) for j in range(block)], axis=1)
    V, _ = np.linalg.qr(V)
    lam_old = lam = 0.0
    for it in range(1, max_iter + 1):
        Z = lu.solve(lu.solve(V), adjoint=True)
        H = V.conj().T @ Z
        theta, S = np.linalg.eigh((H + H.conj().T) / 2)
        lam = float(theta[-1])
        V, _ = np.linalg.qr(Z @ S[:, ::-1])
        change = abs(lam - lam_old) / lam
        if change < tol:
            return math.sqrt(lam), change, it
        lam_old = lam
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps", (lam_old, lam))


def resolvent_norm_1d(q: float, E: float, W, grid: CircleGrid, tol: float = 1e-6,
                      max_iter: int = 500, seed: int = 0) -> ResolventPoint:
    """||A^{-1}|| = 1/sigma_min(A) by inverse iteration on A^H A.

    ``W`` is either sampled damping values or a DampingProfile. The grid weight h
    is a scalar multiple of the identity, so the weighted and plain l2 operator
    norms coincide.
    """
    if isinstance(W, DampingProfile):
        W = sample_on_grid(W, grid)
    A = build_operator(q, E, W, grid)
    norm, change, _ = _inverse_iteration(A.factorize(), grid.n, tol, max_iter, seed)
    return ResolventPoint(A.q, A.E, norm, grid.n, grid.scheme, "inverse-iteration", change)


def resolvent_norm_dense(q: float, E: float, W, grid: CircleGrid) -> ResolventPoint:
    """Oracle: smallest singular value of the assembled dense matrix."""
    import scipy.linalg

    if isinstance(W, DampingProfile):
        W = sample_on_grid(W, grid)
    A = build_operator(q, E, W, grid)
    smin = scipy.linalg.svdvals(A.matrix()).min()
    return ResolventPoint(A.q, A.E, float(1.0 / smin), grid.n, grid.scheme, "dense-svd-oracle")


def resonances(q: float, W, grid: CircleGrid, count: int = 6, target: float = 0.0) -> np.ndarray:
    """Eigenvalues of -diff2 + i q W closest to ``target``, sorted by real part.

    The 1-d resolvent norm in E peaks near their real parts.
    """
    A = build_operator(q, 0.0, W, grid)
    count = min(count, grid.n - 2)
    if grid.scheme == "fourier":
        lam = np.linalg.eigvals(A.matrix())
        lam = lam[np.argsort(np.abs(lam - target))[:count]]
    else:
        # fixed start vector: ARPACK otherwise draws a random one per process
        v0 = rng.complex_gaussian(grid.n, 0, stream=1 << 20)
        lam = spla.eigs(A.sparse(), k=count, sigma=target, v0=v0, return_eigenvectors=False)
    return np.sort_complex(lam)


def _norm_task(args):
    q, E, k, W, grid, tol, seed = args
    p = resolvent_norm_1d(q, E, W, grid, tol=tol, seed=seed)
    return ResolventPoint(p.q, p.E, p.norm, p.n, p.scheme, p.method, p.residual, k)


def _peak_task(args):
    """Maximize the torus norm near one resonance over frequencies q' in the window."""
    q_nom, lam, k, e_lo, e_hi, W, grid, tol, seed = args

    def neg(E):
        return -resolvent_norm_1d(math.sqrt(E + k * k), E, W, grid, tol=tol, seed=seed).norm

    width = max(abs(lam.imag), 1e-9)
    res = minimize_scalar(neg, bounds=(e_lo, e_hi), method="bounded", options={"xatol": 1e-3 * width})
    E = float(res.x)
    p = resolvent_norm_1d(math.sqrt(E + k * k), E, W, grid, tol=tol, seed=seed)
    return ResolventPoint(q_nom, E, p.norm, p.n, p.scheme, p.method, p.residual, k)


def resolvent_norm_2d(q: float, profile, grid: CircleGrid, E_cut: float = 1.0, q_window: float = 0.0,
                      n_resonances: int = 6, tol: float = 1e-6, seed: int = 0, mapper=map):
    """Torus resolvent norm sup_k ||(-d^2 + i q W - (q^2 - k^2))^{-1}||.

    Modes with q^2 - k^2 < -E_cut are skipped; each contributes at most 1/E_cut.

    With ``q_window > 0`` the sup is also taken over frequencies q' in
    [q - q_window, q]: the norm at each lattice point (q', k) is computed exactly,
    and near every low resonance of the 1-d operator the maximizing q' is searched.
    At integer q the lattice values E = q^2 - k^2 miss every E between 0 and 2q-1,
    which is where the growth lives, so sweeps over integer q need a window.

    Returns (ResolventPoint with k set, list of all evaluated points).
    """
    q = float(q)
    if q < 4:
        raise ValueError("resolvent_norm_2d needs q >= 4")
    W = sample_on_grid(profile, grid) if isinstance(profile, DampingProfile) else np.asarray(profile, float)
    kmax = int(math.floor(math.sqrt(q * q + E_cut)))
    tasks = [(q, q * q - k * k, k, W, grid, tol, seed) for k in range(kmax + 1)]
    points = list(mapper(_norm_task, tasks))
    if q_window > 0:
        q_lo = max(q - q_window, 0.0)
        peak_tasks = []
        for lam in resonances(q, W, grid, n_resonances):
            E0 = lam.real
            if not -E_cut <= E0 <= q * q:
                continue
            k = int(math.floor(math.sqrt(q * q - E0)))
            width = 2 * max(abs(lam.imag), 1e-6)
            # keep q' = sqrt(E + k^2) inside [q_lo, q]
            e_lo = max(E0 - width, q_lo * q_lo - k * k, -E_cut)
            e_hi = min(E0 + width, q * q - k * k)
            if e_lo < e_hi:
                peak_tasks.append((q, lam, k, e_lo, e_hi, W, grid, tol, seed))
        points += list(mapper(_peak_task, peak_tasks))
    best = max(points, key=lambda p: p.norm)
    return best, points
