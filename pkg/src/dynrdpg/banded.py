"""Symmetric banded matrices, banded Cholesky and triangular solves.

Storage is lower-band-by-diagonal: ``bands[k, j] = A[j + k, j]`` for
``0 <= k <= p``. Entries of ``bands[k]`` past ``dim - k`` are padding and
always zero. This is the same layout as ``scipy.linalg.cholesky_banded``
with ``lower=True``.

The kernels are compiled with numba and report how many matrix entries they
touched, so complexity claims can be checked by counting instead of timing.
"""
from dataclasses import dataclass

import numpy as np
from numba import njit


__all__ = ['BandedMatrix', 'BandedCholesky', 'NotPositiveDefiniteError',
           'cholesky_banded', 'solve_banded', 'solve_lower_transpose',
           'solve_lower']

PIVOT_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, index):
        super().__init__(f"matrix is not positive definite "
                         f"(pivot {index} failed)")
        self.index = index


@dataclass
class BandedMatrix:
    """Symmetric matrix with half-bandwidth ``bandwidth``."""
    bands: np.ndarray

    def __post_init__(self):
        self.bands = np.ascontiguousarray(self.bands, dtype=np.float64)
        if self.bands.ndim != 2:
            raise ValueError("bands must be a 2-d array")

    @property
    def dim(self):
        return self.bands.shape[1]

    @property
    def bandwidth(self):
        return self.bands.shape[0] - 1

    @classmethod
    def zeros(cls, dim, bandwidth):
        return cls(np.zeros((bandwidth + 1, dim)))

    @classmethod
    def from_dense(cls, A, bandwidth):
        A = np.asarray(A, dtype=np.float64)
        dim = A.shape[0]
        bands = np.zeros((bandwidth + 1, dim))
        for k in range(min(bandwidth, dim - 1) + 1):
            bands[k, :dim - k] = np.diagonal(A, -k)
        return cls(bands)

    @classmethod
    def diagonal(cls, values):
        return cls(np.asarray(values, dtype=np.float64)[None, :])

    def to_dense(self):
        dim, p = self.dim, self.bandwidth
        A = np.zeros((dim, dim))
        for k in range(min(p, dim - 1) + 1):
            d = self.bands[k, :dim - k]
            A += np.diag(d, -k)
            if k:
                A += np.diag(d, k)
        return A

    def __add__(self, other):
        if not isinstance(other, BandedMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        p = max(self.bandwidth, other.bandwidth)
        bands = np.zeros((p + 1, self.dim))
        bands[:self.bandwidth + 1] += self.bands
        bands[:other.bandwidth + 1] += other.bands
        return BandedMatrix(bands)

    def __mul__(self, c):
        return BandedMatrix(self.bands * float(c))

    __rmul__ = __mul__

    def matvec(self, x):
        return _sym_band_matvec(self.bands, np.asarray(x, dtype=np.float64))


@dataclass
class BandedCholesky:
    """Lower factor ``L`` (same banded layout) with ``L @ L.T = A``."""
    lower: np.ndarray
    ops: int = 0

    @property
    def dim(self):
        return self.lower.shape[1]

    @property
    def bandwidth(self):
        return self.lower.shape[0] - 1

    def to_dense(self):
        dim, p = self.dim, self.bandwidth
        L = np.zeros((dim, dim))
        for k in range(min(p, dim - 1) + 1):
            L += np.diag(self.lower[k, :dim - k], -k)
        return L


@njit(cache=True)
def _band_cholesky(A, L):
    """Factor ``A`` into ``L`` in place; returns (failed_index, ops)."""
    p = A.shape[0] - 1
    n = A.shape[1]
    ops = 0
    dmax = 0.0
    for j in range(n):
        if A[0, j] > dmax:
            dmax = A[0, j]
    tol = PIVOT_RTOL * dmax
    for j in range(n):
        k0 = max(0, j - p)
        s = A[0, j]
        for k in range(k0, j):
            v = L[j - k, k]
            s -= v * v
        ops += j - k0 + 1
        if not s > tol:
            return j, ops
        ljj = np.sqrt(s)
        L[0, j] = ljj
        for i in range(j + 1, min(n, j + p + 1)):
            s = A[i - j, j]
            for k in range(max(0, i - p), j):
                s -= L[i - k, k] * L[j - k, k]
            L[i - j, j] = s / ljj
            ops += j - max(0, i - p) + 1
    return -1, ops


@njit(cache=True)
def _forward(L, b, x):
    """Solve ``L x = b``; returns ops."""
    p = L.shape[0] - 1
    n = L.shape[1]
    ops = 0
    for i in range(n):
        s = b[i]
        k0 = max(0, i - p)
        for k in range(k0, i):
            s -= L[i - k, k] * x[k]
        x[i] = s / L[0, i]
        ops += i - k0 + 1
    return ops


@njit(cache=True)
def _backward(L, b, x):
    """Solve ``L.T x = b``; returns ops."""
    p = L.shape[0] - 1
    n = L.shape[1]
    ops = 0
    for i in range(n - 1, -1, -1):
        s = b[i]
        k1 = min(n, i + p + 1)
        for k in range(i + 1, k1):
            s -= L[k - i, i] * x[k]
        x[i] = s / L[0, i]
        ops += k1 - i
    return ops


@njit(cache=True)
def _sym_band_matvec(A, x):
    p = A.shape[0] - 1
    n = A.shape[1]
    y = np.zeros(n)
    for j in range(n):
        y[j] += A[0, j] * x[j]
        for k in range(1, min(p, n - 1 - j) + 1):
            y[j + k] += A[k, j] * x[j]
            y[j] += A[k, j] * x[j + k]
    return y


def cholesky_banded(A):
    """Banded Cholesky factor of a symmetric positive definite matrix.

    No pivoting. A pivot not exceeding ``1e-12 * max(diag(A))`` raises
    :class:`NotPositiveDefiniteError` carrying the failing index.
    """
    L = np.zeros_like(A.bands)
    failed, ops = _band_cholesky(A.bands, L)
    if failed >= 0:
        raise NotPositiveDefiniteError(failed)
    return BandedCholesky(L, ops)


def _check_rhs(F, b):
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (F.dim,):
        raise ValueError(f"expected a vector of length {F.dim}, "
                         f"got shape {b.shape}")
    return b


def solve_banded(F, b):
    """Solve ``L L^T x = b`` by forward then backward substitution."""
    b = _check_rhs(F, b)
    y = np.empty_like(b)
    x = np.empty_like(b)
    _forward(F.lower, b, y)
    _backward(F.lower, y, x)
    return x


def solve_lower(F, b):
    """Solve ``L x = b``."""
    b = _check_rhs(F, b)
    x = np.empty_like(b)
    _forward(F.lower, b, x)
    return x


def solve_lower_transpose(F, z):
    """Solve ``L^T u = z``.

    With ``z ~ N(0, I)`` the solution has covariance ``(L L^T)^{-1}``, which
    is how Gaussian draws with a banded precision are produced.
    """
    z = _check_rhs(F, z)
    u = np.empty_like(z)
    _backward(F.lower, z, u)
    return u
