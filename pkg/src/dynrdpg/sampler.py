"""Gibbs sampler for the Gibbs posterior of a dynamic RDPG.

The target is::

    exp(-lam * sum_t ||Y_t - X_t X_t^T||_F^2) * RW(r) prior(X | sigma)
        * half-Cauchy(sigma) * Gamma(lam)

One sweep updates every node's whole trajectory from its Gaussian full
conditional (banded precision, O(m d^3 + d sum_t |N_it|) per node), then
the node variances through the inverse-gamma scale mixture of the
half-Cauchy, then the learning rate.
"""
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import banded
from .banded import BandedMatrix, NotPositiveDefiniteError
from .prior import RwPriorSpec, prior_precision_blocks
from .spectral import (align_to_reference, ase_per_time, sequential_align)


__all__ = ['LatentState', 'SamplerConfig', 'PosteriorDraws', 'init_state',
           'full_conditional', 'sample_trajectory', 'sample_variances',
           'sample_lambda', 'lambda_posterior_params', 'loss',
           'gibbs_sweep', 'run_chain', 'postprocess_draws', 'gram_cache']

logger = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-8
LAMBDA_CAP = 1e6
DIAGONAL_CONVENTIONS = ('frobenius', 'gaussian')

# indices into the operation-counter array
ASSEMBLY, RHS, FACTOR, SOLVE = range(4)


@dataclass
class LatentState:
    """One state of the chain.

    ``X[t, i]`` is node i's latent position at time t (shape ``(m, n, d)``).
    """
    X: np.ndarray
    sigma2: np.ndarray
    nu: np.ndarray
    lam: float

    def copy(self):
        return LatentState(self.X.copy(), self.sigma2.copy(),
                           self.nu.copy(), float(self.lam))

    def check(self):
        if not (np.all(self.sigma2 > 0) and np.all(self.nu > 0)
                and self.lam > 0):
            raise ValueError("sigma2, nu and lam must be positive")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("latent positions must be finite")


@dataclass
class SamplerConfig:
    """Sampler settings.

    ``diagonal`` selects how the learning-rate update treats the diagonal of
    ``Y_t - X_t X_t^T``. ``'frobenius'`` uses the full Frobenius residual
    (diagonal terms ``(x_it^T x_it)^2``) with shape ``n(n+1)m/4``.
    ``'gaussian'`` uses the Gaussian pseudolikelihood whose every full
    conditional is exact: off-diagonal entries with precision ``lam`` and
    each latent coordinate observed at zero with precision ``lam/2`` (the
    ridge already present in the trajectory update).

    ``fixed_lambda`` skips the learning-rate update; ``'auto'`` fixes it to
    one over the sample variance of the edge variables. ``loss_scale``
    multiplies the loss (values below one give a fractional posterior).
    """
    d: int
    r: int = 1
    sigma0: float = 1.0
    a_lambda: float = 1e-3
    b_lambda: float = 1e-3
    n_warmup: int = 500
    n_samples: int = 500
    thin: int = 1
    seed: int = 0
    fixed_lambda: object = None
    diagonal: str = 'frobenius'
    loss_scale: float = 1.0
    debug: bool = False

    def __post_init__(self):
        if self.r not in (1, 2):
            raise ValueError(f"r ∈ {{1,2}} required, got {self.r}")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not (self.a_lambda > 0 and self.b_lambda > 0):
            raise ValueError("a_lambda and b_lambda must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples ≥ 1 required")
        if self.n_warmup < 0 or self.thin < 1:
            raise ValueError("need n_warmup >= 0 and thin >= 1")
        if self.diagonal not in DIAGONAL_CONVENTIONS:
            raise ValueError(f"diagonal must be one of {DIAGONAL_CONVENTIONS}")
        if not self.loss_scale > 0:
            raise ValueError("loss_scale must be positive")
        fl = self.fixed_lambda
        if fl is not None and fl != 'auto' and not float(fl) > 0:
            raise ValueError("fixed_lambda must be positive or 'auto'")

    def prior_spec(self, m):
        return RwPriorSpec(r=self.r, d=self.d, m=m, sigma0=self.sigma0)

    def to_dict(self):
        return asdict(self)


@dataclass
class PosteriorDraws:
    """Retained, Procrustes-aligned draws.

    Arrays are stacked over draws: ``X`` is ``(S, m, n, d)``, ``sigma2`` and
    ``nu`` are ``(S, n)`` and ``lam`` is ``(S,)``. ``reference`` is the
    alignment target (the sequentially aligned last draw).
    """
    X: np.ndarray
    sigma2: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    reference: np.ndarray
    config: dict = field(default_factory=dict)
    trace: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    def __len__(self):
        return self.X.shape[0]

    def __getitem__(self, k):
        return LatentState(self.X[k], self.sigma2[k], self.nu[k],
                           float(self.lam[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def mean_positions(self):
        """Posterior mean of the aligned latent positions, ``(m, n, d)``."""
        return self.X.mean(axis=0)

    def mean_gram(self):
        """Posterior mean of ``X_t X_t^T``, ``(m, n, n)``."""
        S = len(self)
        out = np.zeros((self.X.shape[1], self.X.shape[2], self.X.shape[2]))
        for s in range(S):
            out += np.einsum('tia,tja->tij', self.X[s], self.X[s])
        return out / S


def gram_cache(X):
    """``R[t] = sum_i x_it x_it^T``, shape ``(m, d, d)``."""
    return np.einsum('tia,tib->tab', X, X)


# ---------------------------------------------------------------------------
# compiled trajectory update


@njit(cache=True)
def _assemble(i, X, inv_sigma2, lam, K1, k2, R, indptr, indices, weights,
              diag_obs, P, rhs, counts):
    """Banded precision and right-hand side of node i's full conditional.

    ``R`` must already exclude node i.
    """
    m, n, d = X.shape
    p1, dim = K1.shape
    for k in range(p1):
        for c in range(dim):
            P[k, c] = K1[k, c] * inv_sigma2
    half = 0.5 * lam
    for c in range(dim):
        P[0, c] += k2[c] + half
        rhs[c] = half * diag_obs[i, c]
    for t in range(m):
        base = t * d
        for a in range(d):
            for b in range(a + 1):
                P[a - b, base + b] += lam * R[t, a, b]
    counts[ASSEMBLY] += p1 * dim + m * d * d
    nnz = 0
    for t in range(m):
        row = t * n + i
        base = t * d
        for ptr in range(indptr[row], indptr[row + 1]):
            j = indices[ptr]
            lw = lam * weights[ptr]
            for a in range(d):
                rhs[base + a] += lw * X[t, j, a]
        nnz += indptr[row + 1] - indptr[row]
    counts[RHS] += nnz * d


@njit(cache=True)
def _update_node(i, X, inv_sigma2, lam, K1, k2, R, indptr, indices, weights,
                 diag_obs, z, P, L, rhs, tmp, mu, u, counts):
    m, n, d = X.shape
    # remove node i from the cache
    for t in range(m):
        for a in range(d):
            for b in range(d):
                R[t, a, b] -= X[t, i, a] * X[t, i, b]
    _assemble(i, X, inv_sigma2, lam, K1, k2, R, indptr, indices, weights,
              diag_obs, P, rhs, counts)
    for k in range(L.shape[0]):
        for c in range(L.shape[1]):
            L[k, c] = 0.0
    failed, ops = banded._band_cholesky(P, L)
    counts[FACTOR] += ops
    if failed >= 0:
        # restore the cache before reporting
        for t in range(m):
            for a in range(d):
                for b in range(d):
                    R[t, a, b] += X[t, i, a] * X[t, i, b]
        return failed
    ops = banded._forward(L, rhs, tmp)
    ops += banded._backward(L, tmp, mu)
    ops += banded._backward(L, z, u)
    counts[SOLVE] += ops
    for t in range(m):
        for a in range(d):
            X[t, i, a] = mu[t * d + a] + u[t * d + a]
        for a in range(d):
            for b in range(d):
                R[t, a, b] += X[t, i, a] * X[t, i, b]
    return -1


@njit(cache=True)
def _update_all_nodes(X, sigma2, lam, K1, k2, R, indptr, indices, weights,
                      diag_obs, Z, counts):
    m, n, d = X.shape
    dim = m * d
    P = np.empty_like(K1)
    L = np.empty_like(K1)
    rhs = np.empty(dim)
    tmp = np.empty(dim)
    mu = np.empty(dim)
    u = np.empty(dim)
    for i in range(n):
        failed = _update_node(i, X, 1.0 / sigma2[i], lam, K1, k2, R, indptr,
                              indices, weights, diag_obs, Z[i], P, L, rhs,
                              tmp, mu, u, counts)
        if failed >= 0:
            return i, failed
    return -1, -1


# ---------------------------------------------------------------------------
# public single-step API


class _Workspace:
    """Precomputed prior blocks and the running Gram cache for one chain."""

    def __init__(self, net, config, X, diag_obs=None):
        self.spec = config.prior_spec(net.m)
        K1, K2 = prior_precision_blocks(self.spec)
        self.K1 = K1.bands
        self.k2 = K2.bands[0].copy()
        self.R = gram_cache(X)
        self.counts = np.zeros(4, dtype=np.int64)
        dim = net.m * config.d
        if diag_obs is None:
            self.diag_obs = np.zeros((net.n, dim))
        else:
            diag_obs = np.asarray(diag_obs, dtype=np.float64)
            # (m, n, d) -> per-node time-major vectors
            self.diag_obs = np.ascontiguousarray(
                diag_obs.transpose(1, 0, 2).reshape(net.n, dim))


def _effective_lambda(state, config):
    return config.loss_scale * state.lam


def full_conditional(i, state, net, config, diag_obs=None):
    """Precision ``P_i`` (banded), right-hand side and mean of node i's
    trajectory full conditional, built from the sparse neighborhoods."""
    ws = _Workspace(net, config, state.X, diag_obs)
    X = state.X
    ws.R -= np.einsum('ta,tb->tab', X[:, i], X[:, i])
    P = np.empty_like(ws.K1)
    rhs = np.empty(ws.K1.shape[1])
    _assemble(i, X, 1.0 / state.sigma2[i], _effective_lambda(state, config),
              ws.K1, ws.k2, ws.R, net.indptr, net.indices, net.weights,
              ws.diag_obs, P, rhs, ws.counts)
    Pb = BandedMatrix(P)
    mu = banded.solve_banded(banded.cholesky_banded(Pb), rhs)
    return Pb, rhs, mu


def sample_trajectory(i, state, net, config, rng, cache=None, diag_obs=None):
    """Draw node i's trajectory from its full conditional, in place.

    ``cache`` is the running ``gram_cache(state.X)``; it is downdated and
    updated around the draw. Returns the new ``(m, d)`` trajectory.
    """
    X = state.X
    m, n, d = X.shape
    ws = _Workspace(net, config, X, diag_obs)
    R = ws.R if cache is None else cache
    dim = m * d
    z = rng.standard_normal(dim)
    P, L = np.empty_like(ws.K1), np.empty_like(ws.K1)
    bufs = [np.empty(dim) for _ in range(4)]
    failed = _update_node(i, X, 1.0 / state.sigma2[i],
                          _effective_lambda(state, config), ws.K1, ws.k2, R,
                          net.indptr, net.indices, net.weights, ws.diag_obs,
                          z, P, L, *bufs, ws.counts)
    if failed >= 0:
        raise NotPositiveDefiniteError(failed)
    return X[:, i].copy()


def sample_variances(state, config, rng):
    """Update ``sigma2`` and ``nu`` in place from their inverse-gamma full
    conditionals. Returns the number of draws clipped at the floor."""
    X = state.X
    m, n, d = X.shape
    r = config.r
    incr = np.diff(X, n=r, axis=0)
    ss = np.einsum('tia,tia->i', incr, incr)
    shape = ((m - r) * d + 1) / 2
    rate = 0.5 * ss + 1.0 / state.nu
    sigma2 = 1.0 / rng.gamma(shape, 1.0 / rate)
    floored = int(np.count_nonzero(sigma2 < SIGMA2_FLOOR))
    if floored:
        logger.debug("%d variance draws clipped at %g", floored, SIGMA2_FLOOR)
    sigma2 = np.maximum(sigma2, SIGMA2_FLOOR)
    nu = 1.0 / rng.gamma(1.0, 1.0 / (1.0 + 1.0 / sigma2))
    state.sigma2[:] = sigma2
    state.nu[:] = nu
    return floored


def _loss_parts(X, net, cache=None):
    """``(edge, off_edge, diagonal)`` parts of ``sum_t ||Y_t - X_t X_t^T||_F^2``.

    ``edge`` sums squared residuals over stored edges (both triangles),
    ``off_edge`` the squared fitted values of unstored off-diagonal dyads and
    ``diagonal`` the ``(x_it^T x_it)^2`` terms. Residuals on edges are summed
    directly, so a near-perfect fit at large scale does not cancel.
    """
    R = gram_cache(X) if cache is None else cache
    fit = np.einsum('ea,ea->e', X[net.edge_t, net.edge_i],
                    X[net.edge_t, net.edge_j])
    resid = net.edge_w - fit
    sq = np.einsum('tia,tia->ti', X, X)
    diag = float(np.sum(sq * sq))
    # all off-diagonal fitted squares minus those on stored edges
    off_all = float(np.sum(R * R)) - diag
    off_edge = off_all - 2.0 * float(np.dot(fit, fit))
    if off_edge < 1e-6 * off_all:
        # stored edges carry nearly all fitted mass (a dense network), so
        # the difference has cancelled; sum the unstored dyads directly
        off_edge = _unstored_fit_squares(X, net)
    return 2.0 * float(np.dot(resid, resid)), off_edge, diag


def _unstored_fit_squares(X, net):
    total = 0.0
    for t in range(X.shape[0]):
        G = X[t] @ X[t].T
        np.fill_diagonal(G, 0.0)
        sel = net.edge_t == t
        G[net.edge_i[sel], net.edge_j[sel]] = 0.0
        G[net.edge_j[sel], net.edge_i[sel]] = 0.0
        total += float(np.sum(G * G))
    return total


def loss(X, net, cache=None):
    """``sum_t ||Y_t - X_t X_t^T||_F^2`` over full matrices (diagonal of Y is
    zero), computed in O(E d + m n d^2) without densifying Y."""
    return sum(_loss_parts(X, net, cache))


def lambda_posterior_params(state, net, config, cache=None, diag_obs=None):
    """Shape and rate of the learning rate's gamma full conditional."""
    X = state.X
    m, n, d = X.shape
    alpha = config.loss_scale
    edge, off_edge, diag = _loss_parts(X, net, cache)
    if config.diagonal == 'frobenius':
        shape = config.a_lambda + alpha * n * (n + 1) * m / 4
        rate = config.b_lambda + alpha * (edge + off_edge + diag) / 4
    else:
        off = edge + off_edge
        resid = X if diag_obs is None else X - diag_obs
        shape = config.a_lambda + alpha * (n * (n - 1) * m / 4
                                           + n * m * d / 2)
        rate = config.b_lambda + alpha * (off + float(np.sum(resid ** 2))) / 4
    return shape, rate


def sample_lambda(state, net, config, rng, cache=None, diag_obs=None):
    """Draw the learning rate in place (no-op when it is fixed)."""
    if config.fixed_lambda is not None:
        return state.lam
    shape, rate = lambda_posterior_params(state, net, config, cache, diag_obs)
    state.lam = float(rng.gamma(shape, 1.0 / rate))
    return state.lam


def edge_variance(net):
    """Sample variance of ``y_ij,t`` over all dyads i<j and times."""
    N = net.m * net.n * (net.n - 1) // 2
    if N < 2:
        return 0.0
    s1 = float(net.edge_w.sum())
    s2 = float(np.dot(net.edge_w, net.edge_w))
    return max((s2 - s1 * s1 / N) / (N - 1), 0.0)


def init_state(net, config):
    """Initial state from sequentially aligned per-time ASEs."""
    d = config.d
    if d > net.n:
        raise ValueError(f"d={d} exceeds the number of nodes n={net.n}")
    X = sequential_align(ase_per_time(net, d)).positions
    m = net.m
    if m > 1:
        incr = np.diff(X, axis=0)
        sigma2 = np.einsum('tia,tia->i', incr, incr) / ((m - 1) * d)
    else:
        sigma2 = np.ones(net.n)
    sigma2 = np.maximum(sigma2, SIGMA2_FLOOR)
    nu = np.ones(net.n)
    var = edge_variance(net)
    if var * LAMBDA_CAP <= 1.0:
        logger.warning("edge variables have (near) zero variance; "
                       "initial learning rate capped at %g", LAMBDA_CAP)
        lam = LAMBDA_CAP
    else:
        lam = 1.0 / var
    fl = config.fixed_lambda
    if fl is not None:
        lam = lam if fl == 'auto' else float(fl)
    return LatentState(np.ascontiguousarray(X), sigma2, nu, float(lam))


def gibbs_sweep(state, net, config, rng, workspace=None, diag_obs=None):
    """One full sweep (trajectories, variances, learning rate), in place.

    ``diag_obs`` optionally gives ``(m, n, d)`` pseudo-observations of the
    latent coordinates under the ``'gaussian'`` convention; hollow data
    corresponds to zeros.
    """
    X = state.X
    m, n, d = X.shape
    ws = workspace or _Workspace(net, config, X, diag_obs)
    Z = rng.standard_normal((n, m * d))
    node, pivot = _update_all_nodes(
        X, state.sigma2, _effective_lambda(state, config), ws.K1, ws.k2,
        ws.R, net.indptr, net.indices, net.weights, ws.diag_obs, Z,
        ws.counts)
    if node >= 0:
        raise NotPositiveDefiniteError(pivot)
    floored = sample_variances(state, config, rng)
    sample_lambda(state, net, config, rng, cache=ws.R, diag_obs=diag_obs)
    return floored


def postprocess_draws(X_draws):
    """Align raw draws ``(S, m, n, d)`` to the sequentially aligned last
    draw, independently per draw and time. Returns ``(aligned, reference)``.
    """
    X_draws = np.asarray(X_draws, dtype=np.float64)
    if X_draws.ndim != 4 or X_draws.shape[0] < 1:
        raise ValueError("need at least one draw of shape (m, n, d)")
    reference = sequential_align(X_draws[-1])
    return align_to_reference(X_draws, reference), reference


def run_chain(net, config, rng=None, diag_obs=None, progress=None):
    """Run warmup plus ``n_samples * thin`` sweeps and return aligned draws.

    Deterministic given ``config.seed`` (or the supplied generator).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = init_state(net, config)
    ws = _Workspace(net, config, state.X, diag_obs)
    n_sweeps = config.n_warmup + config.n_samples * config.thin
    m, n, d = state.X.shape
    S = config.n_samples
    Xs = np.empty((S, m, n, d))
    sig = np.empty((S, n))
    nus = np.empty((S, n))
    lams = np.empty(S)
    trace = {'sweep': np.arange(1, n_sweeps + 1),
             'lambda': np.empty(n_sweeps), 'mean_sigma2': np.empty(n_sweeps),
             'loss': np.empty(n_sweeps)}
    floored = 0
    t0 = time.perf_counter()
    k = 0
    for s in range(n_sweeps):
        floored += gibbs_sweep(state, net, config, rng, ws, diag_obs)
        if config.debug and (s + 1) % 100 == 0:
            err = np.max(np.abs(ws.R - gram_cache(state.X)))
            if err > 1e-8:
                raise RuntimeError(f"Gram cache drifted by {err:g}")
        trace['lambda'][s] = state.lam
        trace['mean_sigma2'][s] = state.sigma2.mean()
        trace['loss'][s] = loss(state.X, net, ws.R)
        post = s + 1 - config.n_warmup
        if post > 0 and post % config.thin == 0:
            Xs[k], sig[k], nus[k], lams[k] = (state.X, state.sigma2,
                                              state.nu, state.lam)
            k += 1
        if progress is not None:
            progress(s + 1, n_sweeps, state)
    elapsed = time.perf_counter() - t0
    if floored:
        logger.info("%d variance draws hit the floor %g", floored,
                    SIGMA2_FLOOR)
    aligned, reference = postprocess_draws(Xs)
    counters = {'assembly': int(ws.counts[ASSEMBLY]),
                'rhs': int(ws.counts[RHS]),
                'factor': int(ws.counts[FACTOR]),
                'solve': int(ws.counts[SOLVE]),
                'sweeps': n_sweeps, 'sigma2_floor_hits': floored}
    return PosteriorDraws(aligned, sig, nus, lams, reference,
                          config=config.to_dict(), trace=trace,
                          counters=dict(counters, seconds=elapsed))
