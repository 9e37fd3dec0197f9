"""Synthetic dynamic RDPGs.

Two trajectory families are provided: logistic-transformed Matern Gaussian
process paths, and cubic B-spline curves (Dirichlet weights) that continue
linearly past an extrapolation point. Latents are arrays of shape
``(T, n, d)``.
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import interpolate, optimize, special

from .network import DynamicNetwork


__all__ = ['SimulationSpec', 'matern_cov', 'sample_gp_trajectories',
           'to_latent', 'solve_density_scale', 'bspline_weights_basis',
           'bspline_trajectories', 'sample_bernoulli_rdpg', 'simulate',
           'mean_edge_probability']

logger = logging.getLogger(__name__)

FAMILIES = ('matern', 'bspline')


@dataclass
class SimulationSpec:
    n: int
    m: int
    d: int = 2
    family: str = 'matern'
    a: float = math.sqrt(5)
    b: float = None
    nu: float = 2.5
    density: float = 0.2
    q: int = 10
    ell: int = None
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.n < 2 or self.m < 1 or self.d < 1:
            raise ValueError("need n >= 2, m >= 1 and d >= 1")
        if self.b is None:
            self.b = self.m / 3
        if self.ell is None:
            self.ell = 5 if self.family == 'bspline' else 0
        if not (self.a > 0 and self.b > 0 and self.nu > 0):
            raise ValueError("Matern parameters a, b, nu must be positive")
        if not 0 <= self.density < 1:
            raise ValueError("density must lie in [0, 1)")
        if self.ell < 0:
            raise ValueError("ell must be >= 0")
        if self.family == 'bspline' and not 1 <= self.q < self.m - 1:
            raise ValueError("bspline family needs 1 <= q < m - 1")

    @property
    def total_times(self):
        return self.m + self.ell

    def to_dict(self):
        return asdict(self)


def matern_cov(t, t2, a, b, nu):
    """Matern covariance between times ``t`` and ``t2`` (broadcasting)."""
    h = np.abs(np.asarray(t, dtype=np.float64) - np.asarray(t2, dtype=np.float64))
    scaled = np.sqrt(2 * nu) * h / b
    with np.errstate(invalid='ignore'):
        val = (a ** 2 / (special.gamma(nu) * 2 ** (nu - 1))
               * scaled ** nu * special.kv(nu, scaled))
    return np.where(h == 0, a ** 2, val)


def _matern_factor(T, a, b, nu):
    t = np.arange(1, T + 1, dtype=np.float64)
    K = matern_cov(t[:, None], t[None, :], a, b, nu)
    jitter = 1e-10 * a ** 2
    while True:
        try:
            return np.linalg.cholesky(K + jitter * np.eye(T))
        except np.linalg.LinAlgError:
            if jitter >= 1e-6 * a ** 2:
                raise
            jitter *= 10
            logger.info("Matern Gram not positive definite; jitter -> %g",
                        jitter)


def sample_gp_trajectories(spec, rng):
    """Raw GP paths ``(T, n, d)``, i.i.d. over nodes and coordinates."""
    T = spec.total_times
    L = _matern_factor(T, spec.a, spec.b, spec.nu)
    Z = rng.standard_normal((T, spec.n * spec.d))
    return (L @ Z).reshape(T, spec.n, spec.d)


def to_latent(raw, rho):
    """``rho * d^{-1/2} * logistic(raw)`` componentwise."""
    raw = np.asarray(raw, dtype=np.float64)
    d = raw.shape[-1]
    return rho / math.sqrt(d) * special.expit(raw)


def mean_edge_probability(latents):
    """Mean of ``x_it^T x_jt`` over times and pairs i < j."""
    X = np.asarray(latents, dtype=np.float64)
    T, n, _ = X.shape
    tot = X.sum(axis=1)
    pair_sum = 0.5 * (np.einsum('ta,ta->', tot, tot)
                      - np.einsum('tia,tia->', X, X))
    return pair_sum / (T * n * (n - 1) / 2)


def solve_density_scale(base_latents, target, xtol=1e-12):
    """Bisect for ``rho`` in [0, 1] so that scaling ``base_latents`` (the
    latents at ``rho = 1``) gives mean edge probability ``target``."""
    if target == 0:
        return 0.0
    p1 = mean_edge_probability(base_latents)
    if p1 < target:
        raise ValueError(f"target density {target} unattainable; the "
                         f"maximum is {p1:.6g}")
    if p1 == target:
        return 1.0
    return optimize.bisect(lambda rho: rho * rho * p1 - target, 0.0, 1.0,
                           xtol=xtol)


def bspline_weights_basis(m_basis):
    """Five cubic B-spline basis functions on ``[0, m_basis]`` (knots at
    the ends and midpoint) evaluated at ``t = 1..m_basis``."""
    knots = np.r_[[0.0] * 4, m_basis / 2, [float(m_basis)] * 4]
    t = np.arange(1, m_basis + 1, dtype=np.float64)
    return interpolate.BSpline.design_matrix(t, knots, 3).toarray()


def bspline_trajectories(spec, rng):
    """Linear-continuation B-spline curves at ``rho = 1``.

    Returns ``(coords, redraws)`` where ``coords`` has shape ``(T, n, d)``
    with entries in [0, 1] before the ``d^{-1/2}`` scaling is applied by
    the caller, and ``redraws`` counts nodes whose weights were redrawn
    because the linear continuation left [0, 1].
    """
    T, n, d = spec.total_times, spec.n, spec.d
    nb = spec.m - spec.q
    basis = bspline_weights_basis(nb)  # (nb, 5)
    steps = np.arange(1, T - nb + 1, dtype=np.float64)
    coords = np.empty((T, n, d))
    redraws = 0
    for i in range(n):
        for attempt in range(spec.max_retries + 1):
            W = rng.dirichlet(np.full(basis.shape[1], 0.2), size=d)  # (d, 5)
            curve = basis @ W.T  # (nb, d)
            slope = curve[-1] - curve[-2]
            tail = curve[-1] + steps[:, None] * slope
            if np.all((tail >= 0) & (tail <= 1)):
                break
            redraws += 1
        else:
            raise RuntimeError(f"node {i}: linear continuation left [0, 1] "
                               f"after {spec.max_retries} redraws")
        coords[:nb, i] = curve
        coords[nb:, i] = tail
    return coords, redraws


def sample_bernoulli_rdpg(latents, rng):
    """Independent ``Bernoulli(x_it^T x_jt)`` edges for i < j."""
    X = np.asarray(latents, dtype=np.float64)
    T, n, _ = X.shape
    iu, ju = np.triu_indices(n, k=1)
    P = np.einsum('tka,tka->tk', X[:, iu], X[:, ju])
    if np.any(P < -1e-12) or np.any(P > 1 + 1e-12):
        raise ValueError("edge probabilities outside [0, 1]")
    P = np.clip(P, 0.0, 1.0)
    hit = rng.random(P.shape) < P
    tt, kk = np.nonzero(hit)
    return DynamicNetwork(n, T, tt, iu[kk], ju[kk], np.ones(tt.size))


def simulate(spec, rng=None):
    """Generate latents and a network over ``m + ell`` time points.

    Returns ``(network, latents, info)``; ``info`` records ``rho``, the
    achieved mean edge probability and the number of B-spline redraws.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    info = {}
    if spec.family == 'matern':
        raw = sample_gp_trajectories(spec, rng)
        base = to_latent(raw, 1.0)
        info['redraws'] = 0
    else:
        coords, redraws = bspline_trajectories(spec, rng)
        base = coords / math.sqrt(spec.d)
        info['redraws'] = redraws
    rho = solve_density_scale(base, spec.density)
    latents = rho * base
    info['rho'] = rho
    info['mean_probability'] = mean_edge_probability(latents)
    net = sample_bernoulli_rdpg(latents, rng)
    return net, latents, info
