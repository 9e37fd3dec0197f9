"""Sparse dynamic network container and edge-list I/O.

A dynamic network is a sequence of ``m`` symmetric hollow ``n x n``
adjacency matrices. Only the nonzero upper-triangular entries are stored;
every unstored dyad reads as zero.
"""
import json
import os
from collections import Counter

import numpy as np
import scipy.sparse as sp


__all__ = ['DynamicNetwork', 'load_edge_list', 'write_edge_list',
           'density', 'degree_counts']


class EdgeListError(ValueError):
    """Raised for malformed or inconsistent edge-list input."""


class DynamicNetwork:
    """Time-indexed sparse symmetric network.

    Parameters
    ----------
    n, m : int
        Number of nodes and time points.
    t, i, j : array_like of int
        0-based time, row and column of every stored edge. Each unordered
        pair may appear at most once per time point, in either orientation.
    w : array_like of float
        Edge weights. Zero weights are dropped.
    labels : sequence of str, optional
        Node identifiers.
    """

    def __init__(self, n, m, t=(), i=(), j=(), w=(), labels=None):
        if n < 1 or m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
        self.n = int(n)
        self.m = int(m)
        t = np.asarray(t, dtype=np.int64).ravel()
        i = np.asarray(i, dtype=np.int64).ravel()
        j = np.asarray(j, dtype=np.int64).ravel()
        w = np.asarray(w, dtype=np.float64).ravel()
        if not (t.size == i.size == j.size == w.size):
            raise ValueError("edge arrays must have equal length")
        if np.any((i < 0) | (i >= n) | (j < 0) | (j >= n)):
            raise EdgeListError("node index out of range")
        if np.any((t < 0) | (t >= m)):
            raise EdgeListError("time index out of range")
        if np.any(i == j):
            raise EdgeListError("self-loops are not allowed")
        if not np.all(np.isfinite(w)):
            raise EdgeListError("edge weights must be finite")

        keep = w != 0
        t, i, j, w = t[keep], i[keep], j[keep], w[keep]
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        order = np.lexsort((hi, lo, t))
        t, lo, hi, w = t[order], lo[order], hi[order], w[order]
        if t.size > 1:
            same = ((t[1:] == t[:-1]) & (lo[1:] == lo[:-1])
                    & (hi[1:] == hi[:-1]))
            if np.any(same):
                k = int(np.flatnonzero(same)[0])
                raise EdgeListError(
                    f"duplicate edge ({lo[k]}, {hi[k]}) at time {t[k] + 1}")

        self.edge_t, self.edge_i, self.edge_j, self.edge_w = t, lo, hi, w
        self.labels = None if labels is None else [str(s) for s in labels]
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels must have one entry per node")
        self._build_neighborhoods()

    def _build_neighborhoods(self):
        # CSR over flattened (t, i) rows: row t*n + i holds N_it
        n, m = self.n, self.m
        rows = np.concatenate([self.edge_t * n + self.edge_i,
                               self.edge_t * n + self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        vals = np.concatenate([self.edge_w, self.edge_w])
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        self.indptr = np.zeros(n * m + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n * m), out=self.indptr[1:])
        self.indices = cols.astype(np.int64)
        self.weights = vals.astype(np.float64)

    @property
    def n_edges(self):
        """Number of stored (nonzero) edges, counted once per unordered pair."""
        return int(self.edge_w.size)

    @property
    def is_binary(self):
        return bool(np.all(self.edge_w == 1.0))

    def neighbors(self, i, t):
        """Return ``(j, y_ij,t)`` arrays for the neighborhood of node i at t."""
        row = t * self.n + i
        lo, hi = self.indptr[row], self.indptr[row + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def degree(self, i, t):
        row = t * self.n + i
        return int(self.indptr[row + 1] - self.indptr[row])

    def weight(self, i, j, t):
        js, ws = self.neighbors(i, t)
        k = np.searchsorted(js, j)
        if k < js.size and js[k] == j:
            return float(ws[k])
        return 0.0

    def adjacency(self, t, sparse=False):
        """Adjacency matrix at 0-based time ``t`` (dense by default)."""
        n = self.n
        lo, hi = self.indptr[t * n], self.indptr[(t + 1) * n]
        indptr = self.indptr[t * n:(t + 1) * n + 1] - lo
        A = sp.csr_matrix(
            (self.weights[lo:hi], self.indices[lo:hi], indptr), shape=(n, n))
        return A if sparse else A.toarray()

    def to_dense(self):
        """All adjacency matrices as an ``(m, n, n)`` array."""
        Y = np.zeros((self.m, self.n, self.n))
        Y[self.edge_t, self.edge_i, self.edge_j] = self.edge_w
        Y[self.edge_t, self.edge_j, self.edge_i] = self.edge_w
        return Y

    @classmethod
    def from_dense(cls, Y, labels=None):
        """Build from an ``(m, n, n)`` array; only the upper triangle is read."""
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 2:
            Y = Y[None]
        m, n, _ = Y.shape
        if not np.allclose(Y, Y.transpose(0, 2, 1)):
            raise ValueError("adjacency matrices must be symmetric")
        if np.any(np.einsum('tii->ti', Y) != 0):
            raise ValueError("adjacency matrices must be hollow")
        iu, ju = np.triu_indices(n, k=1)
        vals = Y[:, iu, ju]
        tt, kk = np.nonzero(vals)
        return cls(n, m, tt, iu[kk], ju[kk], vals[tt, kk], labels=labels)

    def subset_times(self, times):
        """New network restricted to the given 0-based time indices."""
        times = np.asarray(times, dtype=np.int64)
        remap = np.full(self.m, -1, dtype=np.int64)
        remap[times] = np.arange(times.size)
        keep = remap[self.edge_t] >= 0
        return DynamicNetwork(self.n, times.size, remap[self.edge_t[keep]],
                              self.edge_i[keep], self.edge_j[keep],
                              self.edge_w[keep], labels=self.labels)

    def __repr__(self):
        return (f"DynamicNetwork(n={self.n}, m={self.m}, "
                f"n_edges={self.n_edges})")


def _sidecar_path(path):
    return os.fspath(path) + '.json'


def load_edge_list(path, n=None, m=None):
    """Read a whitespace-separated ``i j t w`` edge list.

    Node indices are 0-based and times 1-based. ``n`` and ``m`` fall back to
    a JSON sidecar (``<path>.json`` holding ``{n, m, labels}``) when omitted.
    Lines with ``w = 0`` are accepted and dropped; blank lines and lines
    starting with ``#`` are skipped.
    """
    labels = None
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar) as f:
            meta = json.load(f)
        n = meta.get('n') if n is None else n
        m = meta.get('m') if m is None else m
        labels = meta.get('labels')
    if n is None or m is None:
        raise ValueError("n and m must be given or present in the sidecar")

    seen = set()
    ts, is_, js, ws = [], [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s or s.startswith('#'):
                continue
            parts = s.split()
            if len(parts) != 4:
                raise EdgeListError(f"{path}:{lineno}: malformed line (expected 4 fields)")
            try:
                i, j, t = int(parts[0]), int(parts[1]), int(parts[2])
                w = float(parts[3])
            except ValueError:
                raise EdgeListError(f"{path}:{lineno}: malformed line") from None
            if not (0 <= i < n and 0 <= j < n):
                raise EdgeListError(
                    f"{path}:{lineno}: node index out of range [0, {n})")
            if not 1 <= t <= m:
                raise EdgeListError(
                    f"{path}:{lineno}: time index out of range [1, {m}]")
            if i == j:
                raise EdgeListError(f"{path}:{lineno}: self-loop ({i}, {i})")
            key = (min(i, j), max(i, j), t)
            if key in seen:
                raise EdgeListError(f"{path}:{lineno}: duplicate edge {key}")
            seen.add(key)
            if w != 0:
                ts.append(t - 1)
                is_.append(i)
                js.append(j)
                ws.append(w)
    return DynamicNetwork(n, m, ts, is_, js, ws, labels=labels)


def write_edge_list(net, path, sidecar=True):
    """Write ``net`` as an edge list (upper triangle, 1-based times)."""
    with open(path, 'w') as f:
        for t, i, j, w in zip(net.edge_t.tolist(), net.edge_i.tolist(),
                              net.edge_j.tolist(), net.edge_w.tolist()):
            f.write(f"{i} {j} {t + 1} {w!r}\n")
    if sidecar:
        meta = {'n': net.n, 'm': net.m, 'labels': net.labels}
        with open(_sidecar_path(path), 'w') as f:
            json.dump(meta, f, indent=2, sort_keys=True)
            f.write('\n')


def density(net):
    """Fraction of nonzero dyads over all ``m * n(n-1)/2`` dyad-times."""
    if net.n < 2:
        raise ValueError("density requires n >= 2")
    return net.n_edges / (net.m * net.n * (net.n - 1) / 2)


def degree_counts(net):
    """Histogram ``{degree: count}`` of ``|N_it|`` over all (i, t)."""
    degrees = np.diff(net.indptr)
    return dict(sorted(Counter(degrees.tolist()).items()))
