"""Command-line front end: ``dynrdpg simulate | fit | forecast | embed |
evaluate``.

Every subcommand writes its outputs plus one ``manifest.json`` into an
output directory (``--out``, else ``$DYNRDPG_OUT/<subcommand>``, else
``./runs/<subcommand>``). Outputs are a pure function of inputs, config and
seed; wall time is only recorded with ``--timing``.
"""
import argparse
import glob
import json
import logging
import os
import re
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import MISSING, fields

import jsonschema
import numpy as np

from . import __version__
from . import io as dio
from .forecast import forecast_expectation, last_gram_forecast
from .metrics import (MetricReport, aggregate, aupr, auc, degree_gof,
                      dyad_scores, rmse_forecast, rmse_latent)
from .network import EdgeListError, load_edge_list, write_edge_list
from .sampler import SamplerConfig, run_chain
from .simulate import SimulationSpec, simulate
from .spectral import ase_per_time, mase, omni, uase

logger = logging.getLogger(__name__)

ENV_OUT = 'DYNRDPG_OUT'
PARTIAL = 'PARTIAL'
EMBEDDERS = {'ase': ase_per_time, 'omni': omni, 'uase': uase, 'mase': mase}
METRICS = ('rmse_latent', 'auc', 'aupr', 'degree_gof', 'rmse_forecast')

_pos = {'type': 'number', 'exclusiveMinimum': 0}
_count = {'type': 'integer', 'minimum': 0}

FIT_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'required': ['d'],
    'properties': {
        'd': {'type': 'integer', 'minimum': 1},
        'r': {'enum': [1, 2]},
        'sigma0': _pos,
        'a_lambda': _pos,
        'b_lambda': _pos,
        'n_warmup': _count,
        'n_samples': {'type': 'integer', 'minimum': 1},
        'thin': {'type': 'integer', 'minimum': 1},
        'seed': _count,
        'fixed_lambda': {'anyOf': [{'type': 'null'}, {'const': 'auto'},
                                   _pos]},
        'diagonal': {'enum': ['frobenius', 'gaussian']},
        'loss_scale': _pos,
        'debug': {'type': 'boolean'},
    },
}

SIM_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'required': ['n', 'm'],
    'properties': {
        'n': {'type': 'integer', 'minimum': 2},
        'm': {'type': 'integer', 'minimum': 1},
        'd': {'type': 'integer', 'minimum': 1},
        'family': {'enum': ['matern', 'bspline']},
        'a': _pos,
        'b': {'anyOf': [{'type': 'null'}, _pos]},
        'nu': _pos,
        'density': {'type': 'number', 'minimum': 0, 'exclusiveMaximum': 1},
        'q': {'type': 'integer', 'minimum': 1},
        'ell': {'anyOf': [{'type': 'null'}, _count]},
        'seed': _count,
        'max_retries': _count,
    },
}


class UsageError(Exception):
    """Invalid user input; reported without a traceback, exit code 2."""


# -- config handling ---------------------------------------------------------

def _key_line(text, path):
    """Best-effort line number of the last key in ``path`` within ``text``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count('\n', 0, m.start()) + 1 if m else 1


def _error_message(err):
    key = err.path[-1] if err.path else None
    if err.validator == 'enum':
        vals = ','.join(json.dumps(v) for v in err.validator_value)
        return f"{key} ∈ {{{vals}}}, got {json.dumps(err.instance)}"
    if err.validator == 'additionalProperties':
        extra = sorted(set(err.instance) - set(err.schema['properties']))
        return "unknown key(s) " + ', '.join(repr(k) for k in extra)
    if err.validator == 'required':
        return err.message
    return f"{key}: {err.message}" if key is not None else err.message


def validate_config(obj, schema, text='', source='<config>'):
    """Validate ``obj`` against ``schema``; raise UsageError listing every
    problem as ``source:line: message``."""
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.path))
    if errors:
        lines = [f"{source}:{_key_line(text, e.path)}: {_error_message(e)}"
                 for e in errors]
        raise UsageError('\n'.join(lines))


def load_config(path, schema):
    if path is None:
        return {}, ''
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: "
                         f"{exc.msg}")
    if not isinstance(obj, dict):
        raise UsageError(f"{path}:1: config must be a JSON object")
    return obj, text


def _defaults(cls):
    return {f.name: f.default for f in fields(cls)
            if f.default is not MISSING}


# -- shared plumbing ---------------------------------------------------------

def _out_dir(args):
    if args.out:
        return args.out
    root = os.environ.get(ENV_OUT) or 'runs'
    return os.path.join(root, args.command)


def _manifest(out, command, config, inputs, outputs, seed, extra=None,
              timing=None):
    man = {'subcommand': command, 'config': config, 'inputs': inputs,
           'outputs': sorted(outputs), 'seed': seed, 'version': __version__}
    if extra:
        man.update(extra)
    if timing is not None:
        man['wall_time_seconds'] = timing
    dio.write_json(os.path.join(out, 'manifest.json'), man)


def _load_network(path):
    try:
        return load_edge_list(path)
    except FileNotFoundError:
        raise UsageError(f"network file not found: {path}")
    except EdgeListError as exc:
        raise UsageError(str(exc))


def _map_jobs(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


# -- simulate ----------------------------------------------------------------

def _simulate_one(job):
    spec_dict, seed_entropy, rep_dir = job
    spec = SimulationSpec(**spec_dict)
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    net, latents, info = simulate(spec, rng)
    os.makedirs(rep_dir, exist_ok=True)
    train = net.subset_times(range(spec.m))
    write_edge_list(train, os.path.join(rep_dir, 'network.txt'))
    files = ['network.txt', 'network.txt.json', 'truth.csv', 'info.json']
    if spec.ell:
        write_edge_list(net.subset_times(range(spec.m, spec.total_times)),
                        os.path.join(rep_dir, 'heldout.txt'))
        files += ['heldout.txt', 'heldout.txt.json']
    dio.write_positions(os.path.join(rep_dir, 'truth.csv'), latents)
    info = dict(info, edges=net.n_edges, train_times=spec.m,
                total_times=spec.total_times)
    dio.write_json(os.path.join(rep_dir, 'info.json'), info)
    return files


def cmd_simulate(args):
    obj, text = load_config(args.spec, SIM_SCHEMA)
    validate_config(obj, SIM_SCHEMA, text, args.spec)
    if args.seed is not None:
        obj['seed'] = args.seed
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    try:
        spec = SimulationSpec(**obj)
    except ValueError as exc:
        raise UsageError(f"{args.spec}: {exc}")
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    width = max(3, len(str(args.replicates - 1)))
    jobs = []
    for r in range(args.replicates):
        # a single replicate reproduces simulate(spec) exactly
        if args.replicates == 1:
            jobs.append((spec.to_dict(), spec.seed, out))
        else:
            rep = os.path.join(out, f"rep_{str(r).zfill(width)}")
            jobs.append((spec.to_dict(), [spec.seed, r], rep))
    t0 = time.perf_counter()
    try:
        results = _map_jobs(_simulate_one, jobs, args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc))
    outputs = []
    for (_, _, rep), files in zip(jobs, results):
        rel = os.path.relpath(rep, out)
        outputs += [f if rel == '.' else f"{rel}/{f}" for f in files]
    _manifest(out, 'simulate', spec.to_dict(), {'spec': args.spec}, outputs,
              spec.seed, {'replicates': args.replicates},
              time.perf_counter() - t0 if args.timing else None)
    print(f"wrote {args.replicates} replicate(s) to {out}")
    return 0


# -- fit ---------------------------------------------------------------------

def _fit_one(job):
    net_path, config_dict, out, timing = job
    net = _load_network(net_path)
    config = SamplerConfig(**config_dict)
    os.makedirs(out, exist_ok=True)
    marker = os.path.join(out, PARTIAL)
    with open(marker, 'w') as fh:
        fh.write('fit started; outputs incomplete\n')
    for stale in ('draws', 'manifest.json'):
        p = os.path.join(out, stale)
        if os.path.isdir(p):
            shutil.rmtree(p)
        elif os.path.exists(p):
            os.remove(p)
    t0 = time.perf_counter()
    draws = run_chain(net, config)
    dio.write_draws(out, draws)
    counters = {k: v for k, v in draws.counters.items() if k != 'seconds'}
    outputs = ['config.json', 'reference.csv', 'trace.csv'] + [
        f"draws/{k}/{f}" for k in range(len(draws))
        for f in ('positions.csv', 'scalars.json')]
    _manifest(out, 'fit', config.to_dict(), {'network': net_path}, outputs,
              config.seed,
              {'counters': counters,
               'network': {'n': net.n, 'm': net.m, 'edges': net.n_edges}},
              time.perf_counter() - t0 if timing else None)
    os.remove(marker)
    return out


def _fit_dirs(paths, out):
    if len(paths) == 1:
        return [out]
    names = [os.path.basename(os.path.dirname(os.path.abspath(p)))
             for p in paths]
    if len(set(names)) != len(names):
        names = [f"fit_{k:03d}" for k in range(len(paths))]
    return [os.path.join(out, nm) for nm in names]


def cmd_fit(args):
    obj, text = load_config(args.config, FIT_SCHEMA)
    for key in ('d', 'r'):
        if getattr(args, key) is not None:
            obj[key] = getattr(args, key)
    if args.seed is not None:
        obj['seed'] = args.seed
    validate_config(obj, FIT_SCHEMA, text, args.config or '<arguments>')
    resolved = dict(_defaults(SamplerConfig), **obj)
    try:
        SamplerConfig(**resolved)
    except ValueError as exc:
        raise UsageError(str(exc))
    paths = []
    for p in args.network:
        matched = sorted(glob.glob(p)) if glob.has_magic(p) else [p]
        if not matched:
            raise UsageError(f"no network files match {p}")
        paths += matched
    out = _out_dir(args)
    dirs = _fit_dirs(paths, out)
    jobs = [(p, resolved, d, args.timing) for p, d in zip(paths, dirs)]
    for d in _map_jobs(_fit_one, jobs, args.jobs):
        print(f"wrote draws to {d}")
    return 0


# -- forecast ----------------------------------------------------------------

def cmd_forecast(args):
    if args.k < 1:
        raise UsageError("k must be >= 1")
    if not 0 < args.level < 1:
        raise UsageError("level must lie in (0, 1)")
    try:
        draws = dio.read_draws(args.draws)
    except FileNotFoundError as exc:
        raise UsageError(f"missing draws: {exc}")
    seed = 0 if args.seed is None else args.seed
    fc = forecast_expectation(draws, args.k, level=args.level, seed=seed,
                              clamp=args.clamp)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    dio.write_forecast(os.path.join(out, 'forecast.csv'), fc)
    config = {'k': args.k, 'level': args.level, 'clamp': args.clamp,
              'r': int(draws.config.get('r', 1)), 'n_draws': len(draws)}
    _manifest(out, 'forecast', config, {'draws': args.draws},
              ['forecast.csv'], seed)
    print(f"wrote {args.k}-step forecast to {out}")
    return 0


# -- embed -------------------------------------------------------------------

def cmd_embed(args):
    net = _load_network(args.network)
    try:
        emb = EMBEDDERS[args.method](net, args.d)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = _out_dir(args)
    dio.write_embedding(out, emb)
    _manifest(out, 'embed', {'method': args.method, 'd': args.d},
              {'network': args.network}, ['embedding.csv', 'factors.json'],
              None)
    print(f"wrote {args.method} embedding to {out}")
    return 0


# -- evaluate ----------------------------------------------------------------

def _named(values, flag):
    out = []
    for v in values or []:
        name, sep, path = v.partition('=')
        if not sep or not name or not path:
            raise UsageError(f"{flag} expects NAME=PATH, got {v!r}")
        out.append((name, path))
    return out


class _Estimate:
    """Positions and in-sample edge estimates from a draws directory, an
    embedding directory or a positions CSV."""

    def __init__(self, path):
        self.draws = None
        if os.path.isdir(os.path.join(path, 'draws')):
            self.draws = dio.read_draws(path)
            self.positions = self.draws.mean_positions()
            self._edges = self.draws.mean_gram
        else:
            emb = dio.read_embedding(path)
            self.positions = emb.positions
            self._edges = emb.edge_estimates

    def edges(self):
        return self._edges()


def _safe(reports, metric, method, rep, fn):
    try:
        reports.append(MetricReport(metric, fn(), method=method,
                                    replicate=rep))
    except (ValueError, FileNotFoundError, KeyError) as exc:
        reports.append(MetricReport(metric, 0.0, method=method,
                                    replicate=rep, error=str(exc)))


def _evaluate_replicate(base, rep, args, metrics):
    def at(p):
        return p if base is None or os.path.isabs(p) else os.path.join(base, p)

    truth = dio.read_positions(at(args.truth)) if args.truth else None
    net = _load_network(at(args.network)) if args.network else None
    reports = []
    for name, path in _named(args.estimate, '--estimate'):
        est = _Estimate(at(path))
        m = est.positions.shape[0]
        if 'rmse_latent' in metrics:
            def f():
                if truth is None:
                    raise ValueError("rmse_latent needs --truth")
                return rmse_latent(truth[:m], est.positions)
            _safe(reports, 'rmse_latent', name, rep, f)
        for metric, fn in (('auc', auc), ('aupr', aupr)):
            if metric in metrics:
                def f(fn=fn, metric=metric):
                    if net is None:
                        raise ValueError(f"{metric} needs --network")
                    if net.m != m:
                        raise ValueError("estimate and network disagree on m")
                    return fn(*dyad_scores(net, est.edges()))
                _safe(reports, metric, name, rep, f)
        if 'degree_gof' in metrics and net is not None:
            X = est.draws if est.draws is not None else est.positions
            bands = degree_gof(X, net, n_sim=args.n_sim, seed=args.seed or 0)
            reports.append(MetricReport('degree_coverage', bands.coverage(),
                                        method=name, replicate=rep))
            reports.append(MetricReport('degree_band_width',
                                        bands.mean_width(), method=name,
                                        replicate=rep))
    if 'rmse_forecast' in metrics:
        for name, path in _named(args.forecast, '--forecast'):
            p = at(path)
            if os.path.isdir(p) and os.path.exists(os.path.join(p,
                                                     'forecast.csv')):
                p = os.path.join(p, 'forecast.csv')
            if os.path.isdir(p):
                emb = dio.read_embedding(p)
                m = emb.m
                horizon = truth.shape[0] - m if truth is not None else 0
                fc = last_gram_forecast(emb.edge_estimates()[-1],
                                        max(horizon, 1))
            else:
                fc = dio.read_forecast(p)
                m = net.m if net is not None else None
            for k in range(1, fc.horizon + 1):
                def f(k=k):
                    if truth is None or m is None:
                        raise ValueError("rmse_forecast needs --truth and "
                                         "--network")
                    if m + k > truth.shape[0]:
                        raise ValueError(f"truth ends before step {k}")
                    return rmse_forecast(truth[m + k - 1], fc, k)
                _safe(reports, f'rmse_forecast_k{k}', name, rep, f)
    return reports


def _print_table(summary, multi):
    methods = sorted({s[0] for s in summary})
    metrics = sorted({s[1] for s in summary},
                     key=lambda x: (x not in ('auc', 'aupr'), x))
    cell = {(s[0], s[1]): s for s in summary}
    head = ['method'] + [m.upper() if m in ('auc', 'aupr') else m
                         for m in metrics]
    rows = []
    for meth in methods:
        row = [meth]
        for met in metrics:
            s = cell.get((meth, met))
            if s is None:
                row.append('-')
            elif multi:
                row.append(f"{s[2]:.4f} ± {s[3]:.4f}")
            else:
                row.append(f"{s[2]:.4f}")
        rows.append(row)
    widths = [max(len(r[c]) for r in [head] + rows) for c in range(len(head))]
    for r in [head] + rows:
        print('  '.join(v.ljust(w) for v, w in zip(r, widths)).rstrip())


def cmd_evaluate(args):
    metrics = args.metrics.split(',')
    bad = [m for m in metrics if m not in METRICS]
    if bad:
        raise UsageError(f"unknown metric(s) {', '.join(bad)}; choose from "
                         f"{', '.join(METRICS)}")
    if args.replicates:
        bases = sorted(d for d in glob.glob(args.replicates)
                       if os.path.isdir(d))
        if not bases:
            raise UsageError(f"no replicate directories match "
                             f"{args.replicates}")
    else:
        bases = [None]
    reports = []
    for base in bases:
        rep = '' if base is None else os.path.basename(os.path.normpath(base))
        try:
            reports += _evaluate_replicate(base, rep, args, metrics)
        except (ValueError, OSError) as exc:
            raise UsageError(f"{rep or 'evaluate'}: {exc}")
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    dio.write_metrics(os.path.join(out, 'metrics.csv'), reports)
    summary = aggregate(reports)
    with open(os.path.join(out, 'summary.csv'), 'w') as fh:
        fh.write('method,metric,mean,sd,count\n')
        for meth, met, mean, sd, cnt in summary:
            fh.write(f"{meth},{met},{mean!r},{sd!r},{cnt}\n")
    for r in reports:
        if r.error:
            print(f"error: {r.method} {r.metric} {r.replicate}: {r.error}",
                  file=sys.stderr)
    _print_table(summary, len(bases) > 1)
    config = {'metrics': metrics, 'truth': args.truth,
              'network': args.network, 'estimate': args.estimate or [],
              'forecast': args.forecast or [], 'replicates': args.replicates,
              'n_sim': args.n_sim}
    _manifest(out, 'evaluate', config, {'replicate_dirs': bases},
              ['metrics.csv', 'summary.csv'], args.seed)
    return 0


# -- entry point -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog='dynrdpg',
        description='Gibbs-posterior dynamic RDPG embedding and forecasting')
    p.add_argument('-v', '--verbose', action='store_true')
    sub = p.add_subparsers(dest='command', required=True)

    def common(sp, jobs=False):
        sp.add_argument('--out', help=f'output directory (default '
                        f'${ENV_OUT}/<subcommand> or runs/<subcommand>)')
        sp.add_argument('--seed', type=int, default=None)
        sp.add_argument('--timing', action='store_true',
                        help='record wall time in the manifest')
        if jobs:
            sp.add_argument('--jobs', type=int, default=1,
                            help='parallel replicate jobs')

    sp = sub.add_parser('simulate', help='generate synthetic replicates')
    sp.add_argument('spec', help='SimulationSpec JSON file')
    sp.add_argument('--replicates', type=int, default=1)
    common(sp, jobs=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser('fit', help='run the Gibbs sampler')
    sp.add_argument('network', nargs='+', help='edge-list file(s) or glob')
    sp.add_argument('--config', help='sampler config JSON')
    sp.add_argument('--d', type=int, help='latent dimension (overrides '
                    'config)')
    sp.add_argument('--r', type=int, help='random-walk order (overrides '
                    'config)')
    common(sp, jobs=True)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser('forecast', help='k-step-ahead forecasts from draws')
    sp.add_argument('draws', help='draws directory written by fit')
    sp.add_argument('--k', type=int, required=True)
    sp.add_argument('--level', type=float, default=0.95)
    sp.add_argument('--clamp', action='store_true',
                    help='clip to [0, 1] (binary networks)')
    common(sp)
    sp.set_defaults(func=cmd_forecast)

    sp = sub.add_parser('embed', help='spectral baseline embeddings')
    sp.add_argument('network')
    sp.add_argument('--method', required=True, choices=sorted(EMBEDDERS))
    sp.add_argument('--d', type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser('evaluate', help='metrics tables')
    sp.add_argument('--truth', help='latent truth CSV')
    sp.add_argument('--network', help='observed (training) edge list')
    sp.add_argument('--estimate', action='append', metavar='NAME=PATH',
                    help='draws dir, embedding dir or positions CSV')
    sp.add_argument('--forecast', action='append', metavar='NAME=PATH',
                    help='forecast CSV/dir, or an embedding dir for the '
                    'last-Gram baseline')
    sp.add_argument('--metrics', default='rmse_latent,auc,aupr')
    sp.add_argument('--replicates', metavar='GLOB',
                    help='evaluate every matching directory; other paths '
                    'are relative to it')
    sp.add_argument('--n-sim', type=int, default=100)
    common(sp)
    sp.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else
                        logging.WARNING, format='%(levelname)s %(message)s')
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == '__main__':
    sys.exit(main())
