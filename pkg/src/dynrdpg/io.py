"""On-disk formats for positions, draws, forecasts and metric tables.

Floats are written with ``repr`` so every file reloads bit-exactly and the
same arrays always produce the same bytes. Time indices are 1-based in
files and node indices 0-based, as in the edge-list format.
"""
import csv
import json
import os

import numpy as np

from .forecast import Forecast
from .metrics import MetricReport
from .sampler import PosteriorDraws
from .spectral import Embedding


__all__ = ['write_json', 'read_json', 'write_positions', 'read_positions',
           'write_draws', 'read_draws', 'write_forecast', 'read_forecast',
           'write_metrics', 'read_metrics', 'write_embedding',
           'read_embedding']


def _fmt(x):
    return repr(float(x))


def write_json(path, obj):
    with open(path, 'w') as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write('\n')


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_positions(path, X, prefix='x'):
    """One row ``t, i, x_1, ..., x_d`` per (time, node)."""
    X = np.asarray(X, dtype=np.float64)
    m, n, d = X.shape
    with open(path, 'w') as fh:
        fh.write(','.join(['t', 'i'] + [f'{prefix}{h + 1}' for h in range(d)])
                 + '\n')
        for t in range(m):
            rows = X[t].tolist()
            for i in range(n):
                fh.write(f"{t + 1},{i}," + ','.join(map(repr, rows[i]))
                         + '\n')


def read_positions(path):
    """Inverse of :func:`write_positions`; returns ``(m, n, d)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(',')
        if header[:2] != ['t', 'i'] or len(header) < 3:
            raise ValueError(f"{path}: expected header 't,i,...'")
        d = len(header) - 2
        raw = [line.split(',') for line in fh if line.strip()]
    if not raw:
        raise ValueError(f"{path}: no rows")
    t = np.array([int(r[0]) for r in raw]) - 1
    i = np.array([int(r[1]) for r in raw])
    vals = np.array([[float(v) for v in r[2:]] for r in raw])
    if vals.shape[1] != d:
        raise ValueError(f"{path}: ragged rows")
    m, n = t.max() + 1, i.max() + 1
    if t.size != m * n:
        raise ValueError(f"{path}: expected {m * n} rows, found {t.size}")
    X = np.full((m, n, d), np.nan)
    X[t, i] = vals
    if np.isnan(X).any():
        raise ValueError(f"{path}: missing (t, i) rows")
    return X


def write_embedding(path, emb):
    """``embedding.csv`` plus ``factors.json`` (method and, for UASE/MASE,
    the shared factor and per-time scores) inside directory ``path``."""
    os.makedirs(path, exist_ok=True)
    write_positions(os.path.join(path, 'embedding.csv'), emb.positions)
    factors = {'method': emb.method}
    if emb.left is not None:
        factors['left'] = emb.left.tolist()
    if emb.scores is not None:
        factors['scores'] = emb.scores.tolist()
    write_json(os.path.join(path, 'factors.json'), factors)


def read_embedding(path):
    """Inverse of :func:`write_embedding`. A bare CSV file is read as
    positions whose edge estimates are ``X_t X_t^T``."""
    if os.path.isfile(path):
        return Embedding(read_positions(path), 'positions')
    X = read_positions(os.path.join(path, 'embedding.csv'))
    fpath = os.path.join(path, 'factors.json')
    factors = read_json(fpath) if os.path.exists(fpath) else {}
    left = factors.get('left')
    scores = factors.get('scores')
    return Embedding(X, factors.get('method', 'positions'),
                     left=None if left is None else np.array(left),
                     scores=None if scores is None else np.array(scores))


def write_draws(path, draws):
    """Write a draws directory (see :func:`read_draws`).

    Layout: ``draws/{k}/positions.csv``, ``draws/{k}/scalars.json``,
    ``reference.csv``, ``config.json`` and ``trace.csv``.
    """
    os.makedirs(os.path.join(path, 'draws'), exist_ok=True)
    for k in range(len(draws)):
        sub = os.path.join(path, 'draws', str(k))
        os.makedirs(sub, exist_ok=True)
        write_positions(os.path.join(sub, 'positions.csv'), draws.X[k])
        write_json(os.path.join(sub, 'scalars.json'),
                   {'sigma2': draws.sigma2[k].tolist(),
                    'nu': draws.nu[k].tolist(),
                    'lambda': float(draws.lam[k])})
    write_positions(os.path.join(path, 'reference.csv'), draws.reference)
    write_json(os.path.join(path, 'config.json'), draws.config)
    tr = draws.trace
    if tr:
        with open(os.path.join(path, 'trace.csv'), 'w') as fh:
            fh.write('sweep,lambda,mean_sigma2,loss\n')
            for s, lam, sig, ls in zip(tr['sweep'], tr['lambda'],
                                       tr['mean_sigma2'], tr['loss']):
                fh.write(f"{int(s)},{_fmt(lam)},{_fmt(sig)},{_fmt(ls)}\n")


def read_draws(path):
    base = os.path.join(path, 'draws')
    if not os.path.isdir(base):
        raise FileNotFoundError(f"no draws directory under {path}")
    names = sorted(os.listdir(base), key=int)
    if not names:
        raise FileNotFoundError(f"{base} holds no draws")
    X, sig, nus, lams = [], [], [], []
    for name in names:
        sub = os.path.join(base, name)
        X.append(read_positions(os.path.join(sub, 'positions.csv')))
        sc = read_json(os.path.join(sub, 'scalars.json'))
        sig.append(sc['sigma2'])
        nus.append(sc['nu'])
        lams.append(sc['lambda'])
    config = read_json(os.path.join(path, 'config.json'))
    ref = read_positions(os.path.join(path, 'reference.csv'))
    trace = {}
    tpath = os.path.join(path, 'trace.csv')
    if os.path.exists(tpath):
        arr = np.loadtxt(tpath, delimiter=',', skiprows=1, ndmin=2)
        trace = {'sweep': arr[:, 0].astype(int), 'lambda': arr[:, 1],
                 'mean_sigma2': arr[:, 2], 'loss': arr[:, 3]}
    return PosteriorDraws(np.stack(X), np.array(sig, dtype=np.float64),
                          np.array(nus, dtype=np.float64),
                          np.array(lams, dtype=np.float64), ref,
                          config=config, trace=trace)


def write_forecast(path, fc):
    """Rows ``k, i, j, point, lower, upper`` for every step and i < j."""
    n = fc.n
    iu, ju = np.triu_indices(n, k=1)
    with open(path, 'w') as fh:
        fh.write('k,i,j,point,lower,upper\n')
        for s in range(fc.horizon):
            p = fc.point[s][iu, ju].tolist()
            lo = fc.lower[s][iu, ju].tolist()
            up = fc.upper[s][iu, ju].tolist()
            for a, b, x, y, z in zip(iu.tolist(), ju.tolist(), p, lo, up):
                fh.write(f"{s + 1},{a},{b},{x!r},{y!r},{z!r}\n")


def read_forecast(path, n=None, level=None):
    """Inverse of :func:`write_forecast`; diagonals come back as zero."""
    arr = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    k = arr[:, 0].astype(int)
    i = arr[:, 1].astype(int)
    j = arr[:, 2].astype(int)
    if n is None:
        n = int(j.max()) + 1 if j.size else 0
    H = int(k.max()) if k.size else 0
    out = [np.zeros((H, n, n)) for _ in range(3)]
    for a, col in zip(out, (3, 4, 5)):
        a[k - 1, i, j] = arr[:, col]
        a[k - 1, j, i] = arr[:, col]
    return Forecast(*out, level=level if level is not None else 0.95)


_METRIC_FIELDS = ['method', 'replicate', 'metric', 'value', 'error']


def write_metrics(path, reports):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(_METRIC_FIELDS)
        for r in reports:
            value = '' if r.error else _fmt(r.value)
            w.writerow([r.method, r.replicate, r.metric, value, r.error])


def read_metrics(path):
    with open(path, newline='') as fh:
        rows = list(csv.DictReader(fh))
    return [MetricReport(r['metric'], float(r['value']) if r['value'] else 0.0,
                         method=r['method'], replicate=r['replicate'],
                         error=r['error']) for r in rows]
