"""Spectral embeddings of dynamic networks and Procrustes alignment."""
from dataclasses import dataclass, field

import numpy as np


__all__ = ['Embedding', 'ase', 'ase_per_time', 'omni', 'uase', 'mase',
           'procrustes', 'sequential_align', 'align_to_reference']

# mn above this makes the dense omnibus eigendecomposition impractical
OMNI_MAX_SIZE = 12_000


@dataclass
class Embedding:
    """Per-time latent positions, ``positions[t]`` being ``n x d``.

    ``left`` holds the shared left factor of UASE and ``scores`` the per-time
    ``d x d`` score matrices of MASE; both are None for the other methods.
    """
    positions: np.ndarray
    method: str
    left: np.ndarray = None
    scores: np.ndarray = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 3:
            raise ValueError("positions must have shape (m, n, d)")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("embedding contains non-finite values")

    @property
    def m(self):
        return self.positions.shape[0]

    @property
    def n(self):
        return self.positions.shape[1]

    @property
    def d(self):
        return self.positions.shape[2]

    def edge_estimates(self):
        """Estimated ``E(Y_t)`` for every t, shape ``(m, n, n)``."""
        if self.method == 'mase':
            V = self.left
            return np.einsum('ia,tab,jb->tij', V, self.scores, V)
        if self.method == 'uase':
            P = np.einsum('ia,tja->tij', self.left, self.positions)
            return 0.5 * (P + P.transpose(0, 2, 1))
        X = self.positions
        return np.einsum('tia,tja->tij', X, X)


def _check_symmetric(Y):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ValueError("expected a square matrix")
    if Y.size and np.max(np.abs(Y - Y.T)) > 1e-10:
        raise ValueError("matrix is not symmetric")
    return Y


def _top_eig(Y, d):
    """d algebraically largest eigenpairs, descending."""
    vals, vecs = np.linalg.eigh(Y)
    order = np.argsort(-vals, kind='stable')[:d]
    return vals[order], vecs[:, order]


def ase(Y, d):
    """Adjacency spectral embedding ``U_d diag(max(lam_d, 0))^{1/2}``.

    Uses the ``d`` algebraically largest eigenpairs with negative eigenvalues
    clipped to zero, which minimizes ``||Y - X X^T||_F`` over rank-d PSD fits.
    """
    Y = _check_symmetric(Y)
    n = Y.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got d={d}, n={n}")
    vals, vecs = _top_eig(Y, d)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def ase_per_time(net, d):
    """ASE applied separately to every adjacency matrix."""
    X = np.stack([ase(net.adjacency(t), d) for t in range(net.m)])
    return Embedding(X, 'ase')


def omni(net, d):
    """Omnibus embedding: ASE of the ``mn x mn`` matrix with blocks
    ``(Y_t + Y_s) / 2``, split back into ``m`` blocks of ``n`` rows."""
    n, m = net.n, net.m
    if n * m > OMNI_MAX_SIZE:
        raise ValueError(f"omnibus matrix of size {n * m} exceeds the "
                         f"dense limit {OMNI_MAX_SIZE}")
    Y = net.to_dense()
    M = 0.5 * (Y[:, None, :, :] + Y[None, :, :, :])  # (t, s, n, n)
    M = M.transpose(0, 2, 1, 3).reshape(m * n, m * n)
    X = ase(M, d)
    return Embedding(X.reshape(m, n, d), 'omni')


def uase(net, d):
    """Unfolded ASE from the SVD of ``[Y_1, ..., Y_m]`` (n x nm).

    ``positions[t]`` is the t-th ``n x d`` block of the right factor scaled
    by the square-rooted singular values; ``left`` is the left factor scaled
    the same way.
    """
    n, m = net.n, net.m
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= min(n, nm), got d={d}")
    A = np.concatenate([net.adjacency(t) for t in range(m)], axis=1)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    root = np.sqrt(s[:d])
    left = U[:, :d] * root
    right = Vt[:d].T * root  # (nm, d)
    return Embedding(right.reshape(m, n, d), 'uase', left=left)


def _psd_sqrt(R):
    vals, vecs = np.linalg.eigh(0.5 * (R + R.T))
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def mase(net, d):
    """Multiple ASE: a shared ``n x d`` basis V with per-time scores.

    The per-time top-d eigenvectors are concatenated (no eigenvalue
    weighting), V is the leading d left singular vectors of that
    concatenation, and ``R_t = V^T Y_t V``. ``positions[t] = V R_t^{1/2}``
    with negative eigenvalues of ``R_t`` clipped.
    """
    n, m = net.n, net.m
    if not 1 <= d <= n:
        raise ValueError(f"need 1 <= d <= n, got d={d}, n={n}")
    Ys = [net.adjacency(t) for t in range(m)]
    bases = [_top_eig(Y, d)[1] for Y in Ys]
    U, _, _ = np.linalg.svd(np.concatenate(bases, axis=1),
                            full_matrices=False)
    V = U[:, :d]
    R = np.stack([V.T @ Y @ V for Y in Ys])
    X = np.stack([V @ _psd_sqrt(Rt) for Rt in R])
    return Embedding(X, 'mase', left=V, scores=R)


def procrustes(X, X_ref):
    """Orthogonal ``W`` minimizing ``||X W - X_ref||_F`` (SVD of X^T X_ref)."""
    X = np.asarray(X, dtype=np.float64)
    X_ref = np.asarray(X_ref, dtype=np.float64)
    if X.shape != X_ref.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {X_ref.shape}")
    U, _, Vt = np.linalg.svd(X.T @ X_ref)
    return U @ Vt


def _batched_procrustes(X, X_ref):
    # X, X_ref: (..., n, d) -> W: (..., d, d)
    U, _, Vt = np.linalg.svd(np.swapaxes(X, -1, -2) @ X_ref)
    return U @ Vt


def sequential_align(positions):
    """Rotate each ``X_t`` (t >= 2) onto the already aligned ``X_{t-1}``.

    Accepts an :class:`Embedding` or an ``(m, n, d)`` array and returns the
    same kind.
    """
    emb = positions if isinstance(positions, Embedding) else None
    X = np.array(emb.positions if emb is not None else positions,
                 dtype=np.float64)
    for t in range(1, X.shape[0]):
        X[t] = X[t] @ procrustes(X[t], X[t - 1])
    if emb is None:
        return X
    return Embedding(X, emb.method, left=emb.left, scores=emb.scores,
                     extra=dict(emb.extra))


def align_to_reference(X, reference):
    """Rotate every ``X[..., t, :, :]`` onto ``reference[t]`` independently."""
    X = np.asarray(X, dtype=np.float64)
    W = _batched_procrustes(X, np.broadcast_to(reference, X.shape))
    return X @ W
