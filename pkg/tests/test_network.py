import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynrdpg.network import (DynamicNetwork, EdgeListError, degree_counts,
                             density, load_edge_list, write_edge_list)


def write(tmp_path, text, name='net.txt'):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_edge(tmp_path):
    net = load_edge_list(write(tmp_path, "0 1 1 1.0\n"), n=2, m=1)
    assert net.n_edges == 1
    assert net.neighbors(0, 0)[0].tolist() == [1]
    assert net.neighbors(1, 0)[0].tolist() == [0]
    assert net.weight(1, 0, 0) == net.weight(0, 1, 0) == 1.0


def test_empty_file(tmp_path):
    net = load_edge_list(write(tmp_path, ""), n=3, m=2)
    assert net.n_edges == 0
    assert all(net.degree(i, t) == 0 for i in range(3)
               for t in range(2))


@pytest.mark.parametrize('text, match', [
    ("0 0 1 1.0\n", 'self-loop'),
    ("0 5 1 1.0\n", 'range'),
    ("0 1 3 1.0\n", 'range'),
    ("0 1 1\n", 'malformed'),
    ("0 1 1 abc\n", 'malformed'),
    ("0 1 1 1.0\n1 0 1 2.0\n", 'duplicate'),
    ("0 1 1 1.0\n0 1 1 1.0\n", 'duplicate'),
])
def test_bad_lines(tmp_path, text, match):
    with pytest.raises(EdgeListError, match=match):
        load_edge_list(write(tmp_path, text), n=3, m=2)


def test_error_reports_line(tmp_path):
    with pytest.raises(EdgeListError, match=r'net\.txt:3'):
        load_edge_list(write(tmp_path, "0 1 1 1\n# c\n2 2 1 1\n"), n=3, m=1)


def test_zero_weight_dropped_and_comments(tmp_path):
    net = load_edge_list(write(tmp_path, "# header\n0 1 1 0\n\n1 2 2 0.5\n"),
                         n=3, m=2)
    assert net.n_edges == 1
    assert net.weight(0, 1, 0) == 0.0
    assert net.weight(2, 1, 1) == 0.5


def test_sidecar(tmp_path):
    p = write(tmp_path, "0 1 2 1\n")
    (tmp_path / 'net.txt.json').write_text(
        json.dumps({'n': 4, 'm': 3, 'labels': ['a', 'b', 'c', 'd']}))
    net = load_edge_list(p)
    assert (net.n, net.m) == (4, 3)
    assert net.labels == ['a', 'b', 'c', 'd']


def test_density_examples():
    Y = np.ones((2, 3, 3)) - np.eye(3)
    assert density(DynamicNetwork.from_dense(Y)) == 1.0
    assert density(DynamicNetwork(3, 2)) == 0.0
    assert density(DynamicNetwork(3, 1, [0], [0], [2], [1.0])) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        density(DynamicNetwork(1, 1))


def test_degree_count_examples():
    assert degree_counts(DynamicNetwork(2, 2)) == {0: 4}
    assert degree_counts(DynamicNetwork(2, 1, [0], [0], [1], [1.0])) == {1: 2}
    star = DynamicNetwork(4, 1, [0, 0, 0], [0, 0, 0], [1, 2, 3], [1, 1, 1])
    assert degree_counts(star) == {1: 3, 3: 1}


@st.composite
def networks(draw):
    n = draw(st.integers(2, 7))
    m = draw(st.integers(1, 4))
    pairs = [(t, i, j) for t in range(m) for i in range(n)
             for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True,
                           max_size=len(pairs)))
    w = draw(st.lists(st.floats(-5, 5).filter(lambda x: x != 0),
                      min_size=len(chosen), max_size=len(chosen)))
    # store each edge in a random orientation
    flip = draw(st.lists(st.booleans(), min_size=len(chosen),
                         max_size=len(chosen)))
    t = [c[0] for c in chosen]
    i = [c[2] if f else c[1] for c, f in zip(chosen, flip)]
    j = [c[1] if f else c[2] for c, f in zip(chosen, flip)]
    return DynamicNetwork(n, m, t, i, j, w)


@settings(max_examples=60, deadline=None)
@given(networks())
def test_network_invariants(net):
    Y = net.to_dense()
    assert np.array_equal(Y, Y.transpose(0, 2, 1))
    assert np.all(np.diagonal(Y, axis1=1, axis2=2) == 0)
    for t in range(net.m):
        for i in range(net.n):
            nb = set(net.neighbors(i, t)[0].tolist())
            assert nb == set(np.flatnonzero(Y[t, i]).tolist())
    assert sum(k * c for k, c in degree_counts(net).items()) == 2 * net.n_edges
    assert sum(degree_counts(net).values()) == net.n * net.m
    assert net.n_edges == np.count_nonzero(Y) // 2


@settings(max_examples=40, deadline=None)
@given(networks())
def test_round_trip(tmp_path_factory, net):
    p = tmp_path_factory.mktemp('rt') / 'e.txt'
    write_edge_list(net, p)
    back = load_edge_list(p)
    assert (back.n, back.m) == (net.n, net.m)
    assert np.array_equal(back.to_dense(), net.to_dense())


def test_subset_times():
    net = DynamicNetwork(3, 3, [0, 1, 2], [0, 0, 1], [1, 2, 2], [1, 2, 3])
    sub = net.subset_times([1, 2])
    assert sub.m == 2
    assert sub.weight(0, 2, 0) == 2 and sub.weight(1, 2, 1) == 3
