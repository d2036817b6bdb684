"""LU factorizations of the periodic operators assembled on a CircleGrid.

Every factorization exposes ``solve(b, adjoint=False)`` so callers can solve with
A and A^H from one factorization.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack


class SingularSystemError(ArithmeticError):
    def __init__(self, msg, smallest_pivot=None):
        super().__init__(msg if smallest_pivot is None else f"{msg} (smallest pivot {smallest_pivot:.3e})")
        self.smallest_pivot = smallest_pivot


class CyclicTridiagonalLU:
    """LU of a periodic tridiagonal matrix: LAPACK gttrf plus a rank-one corner correction.

    ``lower[i]`` multiplies x[i-1] in row i and ``upper[i]`` multiplies x[i+1], indices
    taken mod n, so ``lower[0]`` and ``upper[-1]`` are the two corner entries.
    """

    def __init__(self, diag, lower, upper):
        d = np.asarray(diag, dtype=complex)
        n = d.size
        lower = np.broadcast_to(np.asarray(lower, dtype=complex), (n,))
        upper = np.broadcast_to(np.asarray(upper, dtype=complex), (n,))
        top_right, bottom_left = lower[0], upper[-1]
        gamma = -d[0] if d[0] != 0 else -1.0
        dd = d.copy()
        dd[0] -= gamma
        dd[-1] -= bottom_left * top_right / gamma
        dl, dd, du_, du2, ipiv, info = lapack.zgttrf(lower[1:].copy(), dd, upper[:-1].copy())
        if info > 0:
            raise SingularSystemError("tridiagonal factor is exactly singular", 0.0)
        self._f = (dl, dd, du_, du2, ipiv)
        self.n = n
        self.smallest_pivot = float(np.min(np.abs(dd)))
        self._u = np.zeros(n, complex)
        self._u[0], self._u[-1] = gamma, bottom_left
        self._v = np.zeros(n, complex)
        self._v[0], self._v[-1] = 1.0, top_right / gamma
        self._z = self._tsolve(self._u, "N")
        self._zh = self._tsolve(np.conj(self._v), "C")
        self._den = 1.0 + self._v @ self._z
        self._denh = 1.0 + np.conj(self._u) @ self._zh
        if self._den == 0 or self._denh == 0:
            raise SingularSystemError("corner correction is singular", self.smallest_pivot)

    def _tsolve(self, b, trans):
        x, info = lapack.zgttrs(*self._f, b, trans=trans)
        return x

    def solve(self, b, adjoint: bool = False) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        if not adjoint:
            y = self._tsolve(b, "N")
            return y - np.multiply.outer(self._z, (self._v @ y) / self._den).reshape(y.shape)
        y = self._tsolve(b, "C")
        return y - np.multiply.outer(self._zh, (np.conj(self._u) @ y) / self._denh).reshape(y.shape)


class SparseLU:
    """SuperLU factorization, used for the wider periodic fd4 band."""

    def __init__(self, matrix: sp.spmatrix):
        try:
            self._lu = spla.splu(sp.csc_matrix(matrix, dtype=complex))
        except RuntimeError as exc:
            raise SingularSystemError(f"sparse LU failed: {exc}") from exc
        self.n = matrix.shape[0]
        self.smallest_pivot = float(np.min(np.abs(self._lu.U.diagonal())))

    def solve(self, b, adjoint: bool = False) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=complex), trans="H" if adjoint else "N")


class DenseLU:
    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=complex)
        self._lu = sla.lu_factor(matrix, check_finite=False)
        self.n = matrix.shape[0]
        self.smallest_pivot = float(np.min(np.abs(np.diag(self._lu[0]))))
        if self.smallest_pivot == 0:
            raise SingularSystemError("dense LU hit an exact zero pivot", 0.0)

    def solve(self, b, adjoint: bool = False) -> np.ndarray:
        return sla.lu_solve(self._lu, np.asarray(b, dtype=complex), trans=2 if adjoint else 0, check_finite=False)
