import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_orthogonal
from dynrdpg.metrics import (MetricReport, aggregate, auc, aupr, degree_gof,
                             dyad_scores, rmse_forecast, rmse_latent)
from dynrdpg.network import DynamicNetwork
from dynrdpg.simulate import sample_bernoulli_rdpg, to_latent


def brute_auc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    tot = sum(1.0 if p > q else 0.5 if p == q else 0.0
              for p in pos for q in neg)
    return tot / (pos.size * neg.size)


def brute_ap(s, y):
    # precision at each positive's own score threshold (ties included)
    vals = [np.sum(y[s >= sp]) / np.sum(s >= sp) for sp in s[y == 1]]
    return float(np.mean(vals))


def test_auc_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    assert auc([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert auc(np.ones(6), [0, 1, 0, 1, 1, 0]) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_aupr_examples():
    assert aupr([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6)
    assert aupr([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    with pytest.raises(ValueError):
        aupr([0.1, 0.2], [0, 0])


scores_labels = st.integers(2, 200).flatmap(lambda k: st.tuples(
    st.lists(st.integers(0, 8), min_size=k, max_size=k),
    st.lists(st.integers(0, 1), min_size=k, max_size=k)))


@settings(max_examples=200, deadline=None)
@given(scores_labels)
def test_ranking_metrics_brute_force(data):
    s, y = np.array(data[0], dtype=float) / 8, np.array(data[1])
    if 0 < y.sum():
        assert aupr(s, y) == pytest.approx(brute_ap(s, y), abs=1e-12)
    if 0 < y.sum() < y.size:
        assert auc(s, y) == pytest.approx(brute_auc(s, y), abs=1e-12)


def test_aupr_permutation_baseline():
    rng = np.random.default_rng(0)
    N, pi = 400, 0.2
    y = np.zeros(N, dtype=int)
    y[:int(N * pi)] = 1
    vals = np.array([aupr(rng.random(N), rng.permutation(y))
                     for _ in range(500)])
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    # average precision of a random ranking has expectation slightly above pi
    # by O(log N / N); include that bias in the tolerance
    assert abs(vals.mean() - pi) <= 3 * se + math.log(N) / N


def test_rmse_latent_examples(rng):
    X = rng.standard_normal((3, 6, 2))
    assert rmse_latent(X, X) == pytest.approx(0, abs=1e-12)
    rot = np.stack([X[t] @ random_orthogonal(rng, 2) for t in range(3)])
    assert rmse_latent(X, rot) <= 1e-8
    a = np.array([[[1.0], [0.0]]])
    assert rmse_latent(a, np.zeros_like(a)) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        rmse_latent(X, X[:2])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(2, 8), st.integers(1, 3),
       st.integers(0, 2**31))
def test_rmse_latent_invariances(m, n, d, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((2, m, n, d))
    base = rmse_latent(X, Y)
    assert abs(rmse_latent(Y, X) - base) <= 1e-10
    XQ = np.stack([X[t] @ random_orthogonal(rng, d) for t in range(m)])
    YQ = np.stack([Y[t] @ random_orthogonal(rng, d) for t in range(m)])
    assert abs(rmse_latent(XQ, Y) - base) <= 1e-8
    assert abs(rmse_latent(X, YQ) - base) <= 1e-8


def test_rmse_latent_d1_enumeration(rng):
    X, Y = rng.standard_normal((2, 2, 5, 1))
    best = sum(min(np.sum((X[t] - s * Y[t]) ** 2) for s in (-1, 1))
               for t in range(2))
    assert rmse_latent(X, Y) == pytest.approx(math.sqrt(best / 10), rel=1e-12)


def test_rmse_forecast_examples():
    X = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    G = X @ X.T
    assert rmse_forecast(X, G[None], 1) == 0.0
    assert rmse_forecast(X, G + 0.3, 1) == pytest.approx(0.3)
    P = np.array([[0, 0.2, 0.1], [0.2, 0, 0.9], [0.1, 0.9, 0]])
    truth = [0.5, 0.0, 0.5]  # dyads (0,1), (0,2), (1,2)
    pred = [0.2, 0.1, 0.9]
    want = math.sqrt(sum((a - b) ** 2 for a, b in zip(truth, pred)) / 3)
    assert rmse_forecast(X, P, 1) == pytest.approx(want)
    with pytest.raises(ValueError):
        rmse_forecast(X, P, 2)


def test_dyad_scores():
    net = DynamicNetwork(3, 2, [0, 1], [0, 1], [1, 2], [1.0, 1.0])
    E = np.arange(18, dtype=float).reshape(2, 3, 3)
    s, y = dyad_scores(net, E)
    assert s.tolist() == [1, 2, 5, 10, 11, 14]
    assert y.tolist() == [True, False, False, False, False, True]


def test_degree_gof_collapse():
    X = np.zeros((2, 4, 1))
    X[:, :3] = 1.0  # nodes 0-2 form a triangle with probability one
    net = sample_bernoulli_rdpg(X, np.random.default_rng(0))
    bands = degree_gof(X, net, n_sim=20)
    assert np.array_equal(bands.lower, bands.upper)
    assert np.array_equal(bands.median, bands.observed)
    assert bands.observed.tolist() == [2, 0, 6, 0]  # pooled over 2 times
    assert bands.coverage() == 1.0 and bands.mean_width() == 0.0


def test_degree_gof_well_specified():
    rng = np.random.default_rng(1)
    X = to_latent(rng.standard_normal((10, 50, 2)), 0.6)
    net = sample_bernoulli_rdpg(X, rng)
    bands = degree_gof(X, net, n_sim=500, seed=2)
    assert bands.coverage() >= 0.9
    rows = list(bands.rows())
    assert len(rows) == 50 and rows[0][0] == 0


def test_degree_gof_epistemic_widens():
    # draws scattered around a point estimate give wider bands than
    # simulating from the point estimate alone
    rng = np.random.default_rng(3)
    X = to_latent(rng.standard_normal((6, 40, 2)), 0.6)
    net = sample_bernoulli_rdpg(X, rng)
    draws = np.clip(X[None] + 0.08 * rng.standard_normal((200,) + X.shape),
                    0, None)
    wide = degree_gof(draws, net, n_sim=400, seed=4)
    plug = degree_gof(X, net, n_sim=400, seed=4)
    assert wide.mean_width() > plug.mean_width()


def test_metric_report_validation():
    r = MetricReport('auc', 0.7, method='gb', replicate='1')
    assert r.to_dict()['value'] == 0.7
    with pytest.raises(ValueError):
        MetricReport('auc', 1.2)
    with pytest.raises(ValueError):
        MetricReport('rmse_latent', -0.1)
    with pytest.raises(ValueError):
        MetricReport('auc', float('nan'))
    e = MetricReport('auc', 0.0, error='no positives')
    assert math.isnan(e.value)


def test_aggregate():
    reps = [MetricReport('auc', v, method='a', replicate=str(k))
            for k, v in enumerate([0.6, 0.8])]
    reps += [MetricReport('auc', 0.5, method='b'),
             MetricReport('auc', 0, method='b', error='x')]
    out = aggregate(reps)
    assert out[0][:2] == ('a', 'auc')
    assert out[0][2] == pytest.approx(0.7)
    assert out[0][3] == pytest.approx(np.std([0.6, 0.8], ddof=1))
    assert out[1] == ('b', 'auc', 0.5, 0.0, 1)
