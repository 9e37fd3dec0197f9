"""k-step-ahead forecasts from posterior draws.

Every draw is pushed forward through its own RW(r) prior (one propagation
path per draw); the forecast of ``E(Y_{m+k})`` is the Monte Carlo average of
``X_{m+k} X_{m+k}^T`` and the credible bounds are per-dyad quantiles of the
same products.
"""
from dataclasses import dataclass

import numpy as np


__all__ = ['Forecast', 'propagate', 'propagate_paths', 'forecast_expectation',
           'last_gram_forecast']


@dataclass
class Forecast:
    """Forecasts for steps ``1..horizon``.

    ``point``, ``lower`` and ``upper`` have shape ``(horizon, n, n)``. The
    diagonal is filled in but does not correspond to an edge.
    """
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95
    n_draws: int = 1

    @property
    def horizon(self):
        return self.point.shape[0]

    @property
    def n(self):
        return self.point.shape[1]

    def step(self, k):
        if not 1 <= k <= self.horizon:
            raise ValueError(f"step {k} outside forecast horizon "
                             f"{self.horizon}")
        return self.point[k - 1]


def propagate_paths(tail, sigma, k, r, rng):
    """Propagate RW(r) states ``k`` steps; returns every step.

    Parameters
    ----------
    tail : ndarray of shape (r, ..., d)
        The last ``r`` states, oldest first.
    sigma : float or ndarray broadcastable to ``tail.shape[1:-1]``
        Transition standard deviations.

    Returns
    -------
    ndarray of shape (k, ..., d)
    """
    if k < 1:
        raise ValueError("forecast horizon k must be >= 1")
    if r not in (1, 2):
        raise ValueError(f"r must be in {{1, 2}}, got {r}")
    tail = np.asarray(tail, dtype=np.float64)
    if tail.shape[0] < r:
        raise ValueError(f"need the last {r} states")
    sigma = np.asarray(sigma, dtype=np.float64)[..., None]
    shape = tail.shape[1:]
    out = np.empty((k,) + shape)
    prev, cur = (tail[-2], tail[-1]) if r == 2 else (None, tail[-1])
    for s in range(k):
        w = rng.standard_normal(shape)
        nxt = (cur if r == 1 else 2 * cur - prev) + sigma * w
        prev, cur = cur, nxt
        out[s] = nxt
    return out


def propagate(tail, sigma, k, r, rng):
    """State ``k`` steps ahead of ``tail`` under an RW(r) walk."""
    return propagate_paths(tail, sigma, k, r, rng)[-1]


def forecast_expectation(draws, k, r=None, level=0.95, rng=None, seed=0,
                         clamp=False, block=None):
    """Monte Carlo forecast of ``E(X_{m+k} X_{m+k}^T | Y_{1:m})``.

    Parameters
    ----------
    draws : PosteriorDraws
    k : int
        Horizon; steps ``1..k`` are all returned.
    r : int, optional
        Random-walk order, by default the one the draws were fitted with.
    level : float
        Central credible level of the per-dyad bounds.
    clamp : bool
        Clip point forecast and bounds to ``[0, 1]`` (binary networks).
    block : int, optional
        Rows per chunk when computing quantiles; by default chosen to keep
        the chunk near 4 million entries.
    """
    if len(draws) == 0:
        raise ValueError("no posterior draws")
    if k < 1:
        raise ValueError("forecast horizon k must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if r is None:
        r = int(draws.config.get('r', 1))
    if rng is None:
        rng = np.random.default_rng(seed)
    X = draws.X  # (S, m, n, d)
    S, m, n, d = X.shape
    if m < r:
        raise ValueError("draws have fewer time points than r")
    tail = np.moveaxis(X[:, m - r:], 1, 0)  # (r, S, n, d)
    future = propagate_paths(tail, np.sqrt(draws.sigma2), k, r, rng)
    q = [(1 - level) / 2, (1 + level) / 2]
    if block is None:
        block = max(1, 4_000_000 // (S * n))
    point = np.empty((k, n, n))
    lower = np.empty((k, n, n))
    upper = np.empty((k, n, n))
    for s in range(k):
        F = future[s]  # (S, n, d)
        point[s] = np.einsum('sia,sja->ij', F, F) / S
        for lo in range(0, n, block):
            G = np.einsum('sia,sja->sij', F[:, lo:lo + block], F)
            lq, uq = np.quantile(G, q, axis=0)
            lower[s, lo:lo + block] = lq
            upper[s, lo:lo + block] = uq
    # quantiles of a symmetric product are symmetric up to rounding
    lower = 0.5 * (lower + lower.transpose(0, 2, 1))
    upper = 0.5 * (upper + upper.transpose(0, 2, 1))
    point = 0.5 * (point + point.transpose(0, 2, 1))
    if clamp:
        point, lower, upper = (np.clip(a, 0.0, 1.0)
                               for a in (point, lower, upper))
    return Forecast(point, lower, upper, level=level, n_draws=S)


def last_gram_forecast(edge_estimate, k):
    """Constant forecast repeating the last in-sample edge estimate."""
    P = np.asarray(edge_estimate, dtype=np.float64)
    stacked = np.repeat(P[None], k, axis=0)
    return Forecast(stacked, stacked.copy(), stacked.copy(), level=0.0,
                    n_draws=1)
