"""
Command-line frontend: one subcommand per experiment, CSV/JSON outputs and a run manifest
"""

import argparse
import csv
import io
import json
import logging
import platform
import subprocess
import sys
import time
from dataclasses import asdict
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .base import ExperimentResult, to_jsonable
from .config import DEFAULT_CONFIG, load_run_config
from .errors import ConfigError, ConvergenceError, DomainError, InvalidInputError, SizeError
from .runner import ExperimentRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3

VALIDATION_ERRORS = (InvalidInputError, DomainError, SizeError, ConfigError)

# parameter name -> (flag, argparse keyword arguments)
PARAMETER_FLAGS: Dict[str, Any] = {
    'lam': ('--lambda', dict(type=float, help='vertical coupling lambda >= 0')),
    'lambdas': ('--lambdas', dict(type=str, help='comma-separated couplings')),
    'h_ext': ('--h-ext', dict(type=float, help='external field')),
    'gamma': ('--gamma', dict(type=float, help='Kac range parameter in (0, 1/2]')),
    'gammas': ('--gammas', dict(type=str, help='comma-separated Kac range parameters')),
    'L': ('--L', dict(type=int, help='lattice side')),
    'ell': ('--ell', dict(type=int, help='block size (number of layers)')),
    'ells': ('--ells', dict(type=str, help='comma-separated box sizes')),
    'grid_step': ('--grid-step', dict(type=float, help='magnetization grid step')),
    'reference': ('--reference', dict(choices=['chain', 'dimer'], help='vertical reference system')),
    'degree': ('--degree', dict(type=int, help='truncation order of the cluster series')),
    'b': ('--b', dict(type=float, help='K-P decay rate (default (5/12) log(1/lambda))')),
    'size_convention': ('--size-convention', dict(choices=['bonds', 'sites'], help='K-P polymer size')),
    'powers': ('--powers', dict(type=str, help='comma-separated exponents, e.g. 2,1')),
    'canonical': ('--canonical', dict(action=argparse.BooleanOptionalAction, help='canonical variable order')),
    'bound_u': ('--bound-u', dict(type=float, help='box |u| <= U for the coefficient bound')),
    'restarts': ('--restarts', dict(type=int, help='multistart count')),
    'include_a0': ('--include-a0', dict(action=argparse.BooleanOptionalAction, help='add the constant A_0')),
    'm': ('--m', dict(type=str, help='layer magnetization, or a comma-separated profile of ell values')),
    'resolution': ('--resolution', dict(type=int, help='grid points per axis')),
    'bound': ('--bound', dict(type=float, help='grid half-width, below 1')),
    'sweeps': ('--sweeps', dict(type=int, help='total Monte Carlo sweeps')),
    'warmup': ('--warmup', dict(type=int, help='discarded sweeps (default sweeps/10)')),
    'seed': ('--seed', dict(type=int, help='random seed')),
    'ratio': ('--ratio', dict(type=int, help='L / kernel range')),
    'workers': ('--workers', dict(type=int, help='parallel chains')),
    'kernel_shape': ('--kernel-shape', dict(choices=['raised_cosine', 'box'], help='Kac kernel profile')),
    'kac_strength': ('--kac-strength', dict(type=float, help='scale of the Kac interaction')),
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the validation code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser(runner: ExperimentRunner) -> argparse.ArgumentParser:
    parser = _Parser(prog='kac_ising', description='Phase diagram engine for the layered Kac-Ising model')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)
    for experiment in runner.experiments:
        sub = subparsers.add_parser(experiment.name, help=experiment.description,
                                    description=experiment.description)
        for name in list(experiment.defaults) + [r for r in experiment.required if r not in experiment.defaults]:
            flag, kwargs = PARAMETER_FLAGS[name]
            sub.add_argument(flag, dest=name, default=None, **kwargs)
        sub.add_argument('--config', help='TOML file with [params] and optional [solver] tables')
        sub.add_argument('--out', help='output file; stdout when omitted')
        sub.add_argument('--format', dest='output_format', choices=['csv', 'json'], default=None,
                         help='output format (default csv)')
        sub.add_argument('--manifest', help='manifest path (default <out stem>.manifest.json)')
        sub.add_argument('--cache-dir', help='reuse results cached in this directory')
        sub.add_argument('--debug', action='store_true', help='debug logging and a performance summary')
    return parser


def format_value(value: Any) -> str:
    """17 significant digits for floats, lowercase booleans"""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return format(value, '.17g')
    return str(value)


def render_csv(result: ExperimentResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(result.table.columns)
    for row in result.table.rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def render_json(result: ExperimentResult) -> str:
    if result.document is not None:
        return result.document + '\n'
    document = {'experiment': result.experiment_name, 'summary': result.summary}
    if result.table is not None:
        document['columns'] = result.table.columns
        document['rows'] = to_jsonable(result.table.rows)
    return json.dumps(document, indent=2, sort_keys=True) + '\n'


def render_summary(result: ExperimentResult) -> str:
    return json.dumps({'experiment': result.experiment_name, 'summary': result.summary},
                      indent=2, sort_keys=True) + '\n'


def _versions() -> Dict[str, str]:
    versions = {'python': platform.python_version()}
    for package in ('numpy', 'scipy', 'sympy', 'numba'):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = 'not installed'
    return versions


def _git_describe() -> str:
    try:
        completed = subprocess.run(['git', 'describe', '--always', '--dirty'], capture_output=True, text=True,
                                   cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return 'unknown'
    return completed.stdout.strip() if completed.returncode == 0 and completed.stdout.strip() else 'unknown'


def manifest(command: str, flags: Dict[str, Any], params: Dict[str, Any], solver: Dict[str, Any],
             result: Optional[ExperimentResult], wall_time: float, status: str,
             error: Optional[str] = None) -> Dict[str, Any]:
    """Reproducibility record: every flag, resolved parameters, seeds, versions and acceptance"""
    document = {
        'command': command,
        'status': status,
        'flags': to_jsonable(flags),
        'params': to_jsonable(params),
        'solver': to_jsonable(solver),
        'seeds': to_jsonable(result.seeds) if result else {},
        'acceptance': to_jsonable(result.acceptance) if result else {},
        'from_cache': result.from_cache if result else False,
        'versions': _versions(),
        'git_describe': _git_describe(),
        'wall_time': wall_time,
        'timestamp': time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime()),
    }
    if error is not None:
        document['error'] = error
    return document


def _output_paths(args) -> Dict[str, Optional[Path]]:
    out = Path(args.out) if args.out else None
    if args.manifest:
        manifest_path = Path(args.manifest)
    elif out is not None:
        manifest_path = out.with_name(out.stem + '.manifest.json')
    else:
        manifest_path = None
    sidecar = out.with_suffix('.json') if out is not None and out.suffix != '.json' else None
    return {'out': out, 'sidecar': sidecar, 'manifest': manifest_path}


def _write_outputs(result: ExperimentResult, output_format: str, paths: Dict[str, Optional[Path]]):
    if output_format == 'csv' and result.table is not None:
        body = render_csv(result)
    else:
        body = render_json(result)

    if paths['out'] is None:
        sys.stdout.write(body)
        return
    paths['out'].write_text(body)
    print(f"✓ {result.experiment_name}: wrote {paths['out']}", file=sys.stderr)
    if paths['sidecar'] is not None:
        paths['sidecar'].write_text(render_summary(result))
        print(f"  → summary {paths['sidecar']}", file=sys.stderr)


def _print_performance_summary(runner: ExperimentRunner, wall_time: float):
    stats = runner.get_performance_stats()
    print("\n" + "=" * 60, file=sys.stderr)
    print("📊 PERFORMANCE SUMMARY", file=sys.stderr)
    print("=" * 60, file=sys.stderr)
    print(f"Runs: {stats['successful_runs']}/{stats['total_runs']} successful ({stats['success_rate']:.1%})",
          file=sys.stderr)
    print(f"Cache Hit Rate: {stats['cache_hit_rate']:.1%}", file=sys.stderr)
    print(f"Total Time: {wall_time:.2f}s", file=sys.stderr)
    for name, usage in stats['experiment_usage'].items():
        print(f"  {name}: {usage['successes']}/{usage['attempts']} in {usage['avg_time']:.3f}s average",
              file=sys.stderr)
    for operation, seconds in runner.get_timing_summary().items():
        print(f"  → {operation}: {seconds:.3f}s", file=sys.stderr)


def _configure_logging(debug: bool):
    logging.basicConfig(format='%(message)s', stream=sys.stderr)
    logging.getLogger('kac_ising').setLevel(logging.DEBUG if debug else logging.WARNING)


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse flags (over an optional TOML config), run one experiment and write its outputs"""
    started = time.time()
    runner = ExperimentRunner()
    parser = build_parser(runner)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_VALIDATION

    _configure_logging(args.debug)
    runner = ExperimentRunner(cache_dir=args.cache_dir, debug=args.debug)
    flags = {k: v for k, v in vars(args).items() if k != 'command'}
    paths = _output_paths(args)
    params: Dict[str, Any] = {}
    solver = asdict(DEFAULT_CONFIG)
    output_format = args.output_format or 'csv'

    def write_manifest(result, status, error=None):
        if paths['manifest'] is None:
            return
        document = manifest(args.command, flags, params, solver, result, time.time() - started, status, error)
        paths['manifest'].write_text(json.dumps(document, indent=2, sort_keys=True) + '\n')
        logger.debug(f"  → manifest {paths['manifest']} ({status})")

    try:
        config = DEFAULT_CONFIG
        if args.config:
            file_params, config = load_run_config(args.config)
            params.update(file_params)
            solver = asdict(config)
        experiment = runner.get(args.command)
        params.update({name: flags[name] for name in experiment.defaults.keys() | set(experiment.required)
                       if flags.get(name) is not None})
        unknown = sorted(set(params) - set(experiment.defaults) - set(experiment.required))
        if unknown:
            raise ConfigError(f"{args.command}: unknown parameter(s) {', '.join(unknown)}")
        context = runner.prepare(args.command, params, config, output_format)
        params = context.params
        result = runner.run(args.command, params, config, output_format)
    except VALIDATION_ERRORS as e:
        print(f"✗ {args.command}: {e}", file=sys.stderr)
        write_manifest(None, 'rejected', str(e))
        return EXIT_VALIDATION
    except ConvergenceError as e:
        print(f"✗ {args.command}: {e}", file=sys.stderr)
        write_manifest(None, 'failed', str(e))
        return EXIT_CONVERGENCE

    _write_outputs(result, output_format, paths)
    write_manifest(result, 'ok')
    if args.debug:
        _print_performance_summary(runner, time.time() - started)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    return parse_and_dispatch(argv)
