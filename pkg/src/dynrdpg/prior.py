"""Random-walk priors on latent trajectories.

A node's trajectory ``x_{i,1:m}`` is vectorized time-major,
``vec = (x_i1, ..., x_im)`` with each ``x_it`` in R^d, so entry ``t*d + h``
is coordinate ``h`` at time ``t``.
"""
from dataclasses import dataclass

import numpy as np

from .banded import BandedMatrix


__all__ = ['RwPriorSpec', 'difference_matrix', 'prior_precision_blocks',
           'log_prior_density']


@dataclass(frozen=True)
class RwPriorSpec:
    """RW(r) prior: ``r``-th differences are ``N(0, sigma_i^2 I_d)`` and the
    first ``r`` states are ``N(0, sigma0^2 I_d)``."""
    r: int
    d: int
    m: int
    sigma0: float = 1.0

    def __post_init__(self):
        if self.r not in (1, 2):
            raise ValueError(f"random-walk order r must be in {{1, 2}}, "
                             f"got {self.r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.r >= self.m:
            raise ValueError(f"need r < m, got r={self.r}, m={self.m}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")


def difference_matrix(r, m):
    """``(m - r) x m`` matrix whose row k applies the r-th difference at k+r."""
    if not 1 <= r < m:
        raise ValueError(f"need 1 <= r < m, got r={r}, m={m}")
    return np.diff(np.eye(m), n=r, axis=0)


def prior_precision_blocks(spec):
    """Return ``(K1, K2)`` with ``K1 = D_r^T D_r (x) I_d`` and
    ``K2 = sigma0^{-2} sum_{s<=r} e_s e_s^T (x) I_d`` as banded matrices.

    ``K1`` has bandwidth ``r*d`` and ``K2`` is diagonal.
    """
    r, d, m = spec.r, spec.d, spec.m
    DtD = difference_matrix(r, m)
    DtD = DtD.T @ DtD
    dim = m * d
    bands = np.zeros((r * d + 1, dim))
    for lag in range(r + 1):
        diag = np.diagonal(DtD, -lag)  # (DtD)[s + lag, s]
        for h in range(d):
            bands[lag * d, h:dim - lag * d:d] = diag
    K1 = BandedMatrix(bands)
    k2 = np.zeros(dim)
    k2[:r * d] = 1.0 / spec.sigma0 ** 2
    return K1, BandedMatrix.diagonal(k2)


def log_prior_density(X, sigmas, spec):
    """Log density of trajectories under the RW(r) prior.

    Parameters
    ----------
    X : ndarray of shape (m, n, d)
        Latent positions, ``X[t, i]`` being node i at time t.
    sigmas : ndarray of shape (n,)
        Per-node transition standard deviations.
    spec : RwPriorSpec
    """
    X = np.asarray(X, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if np.any(sigmas <= 0):
        raise ValueError("sigmas must be positive")
    m, n, d = X.shape
    r = spec.r
    K1, K2 = prior_precision_blocks(spec)
    K1d, k2 = K1.to_dense(), K2.bands[0]
    vecs = X.transpose(1, 0, 2).reshape(n, m * d)
    quad1 = np.einsum('ia,ab,ib->i', vecs, K1d, vecs)
    quad2 = vecs ** 2 @ k2
    quad = quad1 / sigmas ** 2 + quad2
    log_norm = (-0.5 * r * d * np.log(2 * np.pi * spec.sigma0 ** 2)
                - 0.5 * (m - r) * d * np.log(2 * np.pi * sigmas ** 2))
    return float(np.sum(-0.5 * quad + log_norm))
