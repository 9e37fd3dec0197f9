"""Recovery, forecast and classification metrics."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .network import DynamicNetwork, degree_counts
from .spectral import align_to_reference


__all__ = ['rmse_latent', 'rmse_forecast', 'auc', 'aupr', 'dyad_scores',
           'degree_gof', 'DegreeBands', 'MetricReport', 'aggregate']


@dataclass
class MetricReport:
    """One metric value, optionally tagged with a method and replicate."""
    metric: str
    value: float
    method: str = ''
    replicate: str = ''
    error: str = ''
    alignment: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.error:
            self.value = float('nan')
            return
        self.value = float(self.value)
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric}: non-finite value")
        if self.metric.startswith('rmse') and self.value < 0:
            raise ValueError("RMSE must be non-negative")
        if self.metric in ('auc', 'aupr') and not 0 <= self.value <= 1:
            raise ValueError(f"{self.metric} must lie in [0, 1]")

    def to_dict(self):
        return {'metric': self.metric, 'value': self.value,
                'method': self.method, 'replicate': self.replicate,
                'error': self.error}


def aggregate(reports):
    """Mean and sample SD per (method, metric) over replicates.

    Error rows are skipped. Returns a list of
    ``(method, metric, mean, sd, count)`` sorted by method then metric.
    """
    groups = {}
    for r in reports:
        if not r.error:
            groups.setdefault((r.method, r.metric), []).append(r.value)
    out = []
    for (method, metric), vals in sorted(groups.items()):
        v = np.asarray(vals)
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        out.append((method, metric, float(v.mean()), sd, int(v.size)))
    return out


def rmse_latent(X_true, X_hat):
    """``sqrt(1/(mnd) sum_t min_W ||X_t - Xhat_t W||_F^2)`` over orthogonal W.

    Both arguments have shape ``(m, n, d)``.
    """
    X_true = np.asarray(X_true, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    if X_true.shape != X_hat.shape:
        raise ValueError(f"shape mismatch: {X_true.shape} vs {X_hat.shape}")
    aligned = align_to_reference(X_hat, X_true)
    return float(np.sqrt(np.mean((X_true - aligned) ** 2)))


def rmse_forecast(X_future, forecast, k):
    """Dyad-averaged RMSE between true ``x_i^T x_j`` at step k and the
    forecast point estimate.

    ``X_future`` is the true ``n x d`` latent matrix at time ``m + k``;
    ``forecast`` is a :class:`~dynrdpg.forecast.Forecast` or an
    ``(horizon, n, n)`` array.
    """
    point = getattr(forecast, 'point', forecast)
    point = np.asarray(point, dtype=np.float64)
    if point.ndim == 2:
        point = point[None]
    if k < 1 or k > point.shape[0]:
        raise ValueError(f"forecast horizon {point.shape[0]} is shorter "
                         f"than k={k}")
    X = np.asarray(X_future, dtype=np.float64)
    n = X.shape[0]
    if point.shape[1:] != (n, n):
        raise ValueError("forecast and latents disagree on n")
    iu, ju = np.triu_indices(n, k=1)
    truth = np.einsum('ka,ka->k', X[iu], X[ju])
    err = truth - point[k - 1][iu, ju]
    return float(np.sqrt(np.mean(err ** 2)))


def _binary_inputs(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel() != 0
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    return scores, labels


def auc(scores, labels):
    """Area under the ROC curve as the Mann-Whitney statistic
    ``P(s+ > s-) + P(s+ = s-)/2``."""
    scores, labels = _binary_inputs(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = stats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def aupr(scores, labels):
    """Average precision: sum over distinct score thresholds (descending)
    of precision times the recall gained at that threshold."""
    scores, labels = _binary_inputs(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("AUPR needs at least one positive label")
    order = np.argsort(-scores, kind='stable')
    s, y = scores[order], labels[order]
    # last index of each group of tied scores
    ends = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(y)[ends]
    seen = ends + 1
    gained = np.diff(np.r_[0, tp])
    return float(np.sum((tp / seen) * gained) / n_pos)


def dyad_scores(net, edge_estimates, times=None):
    """Flatten upper-triangular scores and binary labels over times.

    ``edge_estimates`` is ``(m, n, n)``; labels are ``y_ij,t != 0``.
    """
    E = np.asarray(edge_estimates, dtype=np.float64)
    times = range(net.m) if times is None else times
    n = net.n
    iu, ju = np.triu_indices(n, k=1)
    sc, lab = [], []
    for s, t in enumerate(times):
        A = net.adjacency(t)
        sc.append(E[s][iu, ju])
        lab.append(A[iu, ju] != 0)
    return np.concatenate(sc), np.concatenate(lab)


class DegreeBands:
    """Per-degree percentile bands of simulated degree histograms."""

    def __init__(self, degrees, lower, median, upper, observed, simulated):
        self.degrees = degrees
        self.lower = lower
        self.median = median
        self.upper = upper
        self.observed = observed
        self.simulated = simulated

    def support(self):
        """Degrees that were observed or appear in any simulation."""
        return (self.observed > 0) | (self.simulated.max(axis=0) > 0)

    def coverage(self):
        """Fraction of supported degrees whose observed count lies within
        the band."""
        mask = self.support()
        inside = (self.observed >= self.lower) & (self.observed <= self.upper)
        return float(inside[mask].mean())

    def mean_width(self):
        mask = self.support()
        return float((self.upper - self.lower)[mask].mean())

    def rows(self):
        for k in range(self.degrees.size):
            yield (int(self.degrees[k]), int(self.observed[k]),
                   float(self.lower[k]), float(self.median[k]),
                   float(self.upper[k]))


def _degree_vector(net):
    hist = np.zeros(net.n, dtype=np.int64)
    for deg, c in degree_counts(net).items():
        hist[deg] = c
    return hist


def degree_gof(position_draws, net, n_sim=100, rng=None, seed=0,
               level=0.95):
    """Posterior-predictive degree distribution bands.

    Parameters
    ----------
    position_draws : ndarray of shape (S, m, n, d) or PosteriorDraws
        Latent position draws. A single ``(m, n, d)`` estimate gives the
        plug-in (aleatoric only) bands.
    net : DynamicNetwork
        Observed network.
    n_sim : int
        Number of simulated networks; draws are cycled when ``n_sim``
        exceeds their number.
    """
    X = getattr(position_draws, 'X', position_draws)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[None]
    if rng is None:
        rng = np.random.default_rng(seed)
    S, m, n, _ = X.shape
    iu, ju = np.triu_indices(n, k=1)
    picks = np.linspace(0, S - 1, n_sim).round().astype(int) if S > 1 \
        else np.zeros(n_sim, dtype=int)
    sims = np.empty((n_sim, n), dtype=np.int64)
    for k, s in enumerate(picks):
        P = np.clip(np.einsum('tka,tka->tk', X[s][:, iu], X[s][:, ju]),
                    0.0, 1.0)
        hit = rng.random(P.shape) < P
        tt, kk = np.nonzero(hit)
        sim = DynamicNetwork(n, m, tt, iu[kk], ju[kk], np.ones(tt.size))
        sims[k] = _degree_vector(sim)
    q = 100 * np.array([(1 - level) / 2, 0.5, (1 + level) / 2])
    lower, median, upper = np.percentile(sims, q, axis=0)
    return DegreeBands(np.arange(n), lower, median, upper,
                       _degree_vector(net), sims)
