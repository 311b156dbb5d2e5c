"""
Shared plumbing for the fieldinfer management commands.
"""
import argparse
import logging
import time
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.bandwidth.services import DEFAULT_GAMMA, CvConfig, VbConfig, cv_select_k, select_variance_bandwidth
from apps.bootstrap.services import BootstrapConfig, resolve_threads
from apps.cli.services import manifest_json, record_run
from apps.grid.exceptions import ConfigError, FieldInferError
from apps.grid.services import load_grid_csv, make_position_grid
from apps.hac.services import BootstrapMode, HacConfig
from apps.kernels.services import (
    SMOOTHING_KERNELS,
    VARIANCE_KERNELS,
    get_smoothing_kernel,
    get_variance_kernel,
)
from apps.smoother.services import SmootherConfig
from apps.toeplitz.services import SqrtMode

logger = logging.getLogger(__name__)


def parse_gamma(text):
    """
    Candidate set from 'a..b' (integers a to b inclusive) or a comma list.

    Raises:
        argparse.ArgumentTypeError: malformed or empty set
    """
    try:
        if '..' in text:
            lo, hi = (int(part) for part in text.split('..', 1))
            values = tuple(float(b) for b in range(lo, hi + 1))
        else:
            values = tuple(float(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid candidate set {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty candidate set {text!r}")
    return values


class FieldInferCommand(BaseCommand):
    """
    Base class for fieldinfer commands.

    Subclasses implement run(started, **options). Library errors become
    CommandError carrying the error's exit code.
    """

    def add_arguments(self, parser):
        parser.add_argument(
            '--threads', type=int, default=None,
            help='Worker threads (default: FIELDINFER_THREADS)',
        )

    def handle(self, *args, **options):
        started = time.perf_counter()
        try:
            options['threads'] = resolve_threads(options.get('threads'))
            self.run(started=started, **options)
        except FieldInferError as e:
            raise CommandError(str(e), returncode=e.exit_code) from e

    def run(self, started, **options):
        raise NotImplementedError

    def elapsed(self, started):
        return time.perf_counter() - started

    def emit(self, payload, output):
        """Write result bytes to the output file, or to stdout."""
        if output:
            try:
                Path(output).write_bytes(payload)
            except OSError as e:
                raise ConfigError(f"cannot write output {output}: {e}") from e
            logger.info(f"Wrote {output}")
        else:
            self.stdout.write(payload.decode('utf-8'))

    def record(self, command, output_path, manifest_path=None, **kwargs):
        """
        Record the finished run.

        When neither the result nor the manifest has a file, the manifest
        JSON goes to stderr.
        """
        manifest = record_run(command, output_path=output_path, manifest_path=manifest_path, **kwargs)
        if not output_path and not manifest_path:
            self.stderr.write(manifest_json(manifest).decode('utf-8'))
        return manifest


def require_input(path):
    """Path of an existing input file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"input not found: {path}")
    return path


def load_input(path):
    """Field from an existing grid CSV."""
    return load_grid_csv(require_input(path))


def add_output_argument(parser, required=False):
    parser.add_argument('-o', '--output', required=required, help='Result file (default: stdout)')
    parser.add_argument('--manifest', default=None, help='Manifest file (default: next to the output, or stderr)')


def add_kernel_arguments(parser):
    parser.add_argument(
        '--kernel-g', choices=list(SMOOTHING_KERNELS), default='quartic',
        help='Smoothing kernel G (default: quartic)',
    )
    parser.add_argument(
        '--kernel-k', choices=list(VARIANCE_KERNELS), default='gaussian',
        help='Variance kernel K (default: gaussian)',
    )
    parser.add_argument(
        '--sqrt', choices=SqrtMode.values, default=SqrtMode.AUTO,
        help='Toeplitz square-root mode (default: auto)',
    )


def add_selector_arguments(parser, reps_flag='--reps'):
    parser.add_argument('--k-max', type=int, default=20, help='Largest K candidate (default: 20)')
    parser.add_argument('--q', type=float, default=0.1, help='Block fraction (default: 0.1)')
    parser.add_argument(
        '--gamma', type=parse_gamma, default=DEFAULT_GAMMA,
        help="Variance bandwidth candidates, 'a..b' or comma list (default: 1..10)",
    )
    parser.add_argument('--iterations', type=int, default=15, help='Random blocks H (default: 15)')
    parser.add_argument('--pilot', type=float, default=5.0, help='Pilot variance bandwidth (default: 5)')
    parser.add_argument(
        reps_flag, dest='vb_reps', type=int, default=200,
        help='Bootstrap replicates per variance estimate (default: 200)',
    )


def add_inference_arguments(parser):
    """Options shared by ci and test."""
    parser.add_argument('--input', required=True, help='Grid CSV')
    parser.add_argument('--alpha', type=float, default=0.05, help='1 - nominal coverage (default: 0.05)')
    parser.add_argument(
        '--mode', choices=BootstrapMode.values, default=BootstrapMode.HOMOGENEOUS,
        help='Bootstrap mode (default: homogeneous)',
    )
    parser.add_argument('--k', type=int, default=None, help='Smoothing bandwidth (default: cross-validation)')
    parser.add_argument('--b', type=float, default=None, help='Variance bandwidth (default: block selection)')
    parser.add_argument('--grid-divisions', type=int, default=20, help='Positions per axis (default: 20)')
    parser.add_argument('--reps', type=int, default=200, help='Bootstrap replicates (default: 200)')
    parser.add_argument('--seed', type=int, default=0, help='Master seed (default: 0)')
    add_kernel_arguments(parser)
    add_selector_arguments(parser, reps_flag='--vb-reps')


def vb_config(options):
    return VbConfig(
        q=options['q'],
        gamma=options['gamma'],
        iterations=options['iterations'],
        pilot=options['pilot'],
        reps=options['vb_reps'],
        seed=options['seed'],
        kernel=get_variance_kernel(options['kernel_k']),
        sqrt_mode=options['sqrt'],
    )


def resolve_bandwidths(field, options):
    """
    Fixed (K, B) from the options, selecting the missing ones from the data.

    Returns:
        (k, b, auto) with auto True when a selector ran
    """
    g = get_smoothing_kernel(options['kernel_g'])
    k, b = options['k'], options['b']
    auto = k is None or b is None
    if k is None:
        k = cv_select_k(field, CvConfig(options['k_max'], g), threads=options['threads']).k_best
        logger.info(f"Selected K={k} by cross-validation")
    if b is None:
        b = select_variance_bandwidth(field, k, vb_config(options), smoothing_kernel=g, threads=options['threads']).b_best
        logger.info(f"Selected B={b:g} by block subsampling")
    return int(k), float(b), auto


def bootstrap_setup(options):
    """
    Load the input, resolve bandwidths and build the bootstrap run.

    Returns:
        (field, grid, BootstrapConfig, auto)
    """
    if not 0.0 < options['alpha'] < 1.0:
        raise ConfigError(f"alpha out of range: {options['alpha']}")
    field = load_input(options['input'])
    k, b, auto = resolve_bandwidths(field, options)
    cfg = BootstrapConfig(
        reps=options['reps'],
        alpha=options['alpha'],
        mode=options['mode'],
        seed=options['seed'],
        hac=HacConfig(b, get_variance_kernel(options['kernel_k'])),
        smoother=SmootherConfig(k, get_smoothing_kernel(options['kernel_g'])),
        sqrt_mode=options['sqrt'],
    )
    grid = make_position_grid(field.n, field.m, k, options['grid_divisions'])
    return field, grid, cfg, auto


def bootstrap_manifest_config(cfg, options):
    """Resolved configuration of a bootstrap command."""
    return {
        'input': str(options['input']),
        'alpha': cfg.alpha,
        'mode': cfg.mode.value,
        'k': cfg.smoother.bandwidth,
        'b': cfg.hac.bandwidth,
        'grid_divisions': options['grid_divisions'],
        'reps': cfg.reps,
        'kernel_g': cfg.smoother.kernel.name,
        'kernel_k': cfg.hac.kernel.name,
        'sqrt': cfg.sqrt_mode.value,
        'threads': options['threads'],
    }
