"""
Monte-Carlo coverage and size/power studies.

Each simulation is an independent Celery task keyed by (seed, index);
the study runners dispatch them as a group and aggregate in index order.
"""
import csv
import logging
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from celery import group
from django.conf import settings
from django.db import models

from apps.bandwidth.services import CvConfig, VbConfig, cv_select_k, select_variance_bandwidth
from apps.bootstrap.services import BootstrapConfig, run_lwmb, test_mean
from apps.grid.exceptions import ConfigError, GridIOError
from apps.grid.services import make_position_grid
from apps.grid.streams import BOOTSTRAP_SEED, SIMULATION, derive_seed
from apps.hac.services import BootstrapMode, HacConfig
from apps.kernels.services import get_smoothing_kernel, get_variance_kernel
from apps.simulate.services import MeanField, MeanFieldKind, NoiseKind, mean_value, simulate_dataset
from apps.smoother.services import SmootherConfig
from apps.toeplitz.services import SqrtMode

logger = logging.getLogger(__name__)

COVERAGE_HEADER = ['Mean', 'Error', 'K', 'B', 'Grid', 'Mode', 'Coverage', 'Average width']
SIZE_POWER_HEADER = ['Noise', 'Hypothesis', 'Mode', 'Rejection rate']


class StudyKind(models.TextChoices):
    """Study choices."""
    COVERAGE = 'coverage', 'Simultaneous coverage'
    SIZE_POWER = 'sizepower', 'Size and power'


class Hypothesis(models.TextChoices):
    """Size (null mean) or power (disc mean)."""
    NULL = 'H0', 'Zero mean'
    ALTERNATIVE = 'H1', 'Disc mean'


@dataclass(frozen=True)
class StudyConfig:
    """
    Monte-Carlo study configuration.

    Attributes:
        n: field rows
        m: field columns
        mean: MeanField of the coverage study, or the disc of the power study
        noise: NoiseKind
        grid_divisions: positions per axis
        alpha: 1 - nominal coverage
        sims: number of simulated datasets
        boot_reps: bootstrap replicates per dataset
        modes: bootstrap modes to run
        seed: master seed
        k: fixed smoothing bandwidth, or None to select by cross-validation
        b: fixed variance bandwidth, or None to select by block subsampling
        kernel_g: smoothing kernel name
        kernel_k: variance kernel name
        sqrt_mode: SqrtMode
        k_max: largest cross-validation candidate
        vb: VbConfig used when b is None (its seed is replaced per dataset)
    """
    n: int
    m: int
    mean: MeanField = MeanField()
    noise: str = NoiseKind.AR2D
    grid_divisions: int = 20
    alpha: float = 0.05
    sims: int = 200
    boot_reps: int = 200
    modes: tuple = (BootstrapMode.HOMOGENEOUS, BootstrapMode.HETEROGENEOUS)
    seed: int = 0
    k: Optional[int] = None
    b: Optional[float] = None
    kernel_g: str = 'quartic'
    kernel_k: str = 'gaussian'
    sqrt_mode: str = SqrtMode.AUTO
    k_max: int = 20
    vb: VbConfig = field(default_factory=VbConfig)

    def __post_init__(self):
        if self.sims < 1:
            raise ConfigError(f"sims must be >= 1, got {self.sims}")
        if not self.modes:
            raise ConfigError("at least one bootstrap mode is required")
        object.__setattr__(self, 'noise', NoiseKind(self.noise))
        object.__setattr__(self, 'modes', tuple(BootstrapMode(mode) for mode in self.modes))
        object.__setattr__(self, 'sqrt_mode', SqrtMode(self.sqrt_mode))
        get_smoothing_kernel(self.kernel_g)
        get_variance_kernel(self.kernel_k)

    def to_dict(self):
        """JSON-ready snapshot used as the task payload."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['mean'] = {
            'kind': self.mean.kind.value,
            'height': self.mean.height,
            'radius': self.mean.radius,
            'center': list(self.mean.center),
        }
        data['noise'] = self.noise.value
        data['modes'] = [mode.value for mode in self.modes]
        data['sqrt_mode'] = self.sqrt_mode.value
        data['vb'] = {
            'q': self.vb.q,
            'gamma': list(self.vb.gamma),
            'iterations': self.vb.iterations,
            'pilot': self.vb.pilot,
            'reps': self.vb.reps,
        }
        return data

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict."""
        data = dict(data)
        mean = dict(data.pop('mean'))
        vb = dict(data.pop('vb'))
        return cls(
            mean=MeanField(
                kind=mean['kind'], height=mean['height'], radius=mean['radius'], center=tuple(mean['center'])
            ),
            vb=VbConfig(
                q=vb['q'], gamma=tuple(vb['gamma']), iterations=vb['iterations'], pilot=vb['pilot'], reps=vb['reps']
            ),
            modes=tuple(data.pop('modes')),
            **data,
        )


@dataclass(frozen=True)
class StudyResult:
    """
    Aggregated study table with the per-simulation records.

    Attributes:
        kind: StudyKind
        header: CSV column names
        rows: list of row lists
        sims: per-simulation dicts in index order
    """
    kind: str
    header: list
    rows: list
    sims: list


def _bandwidths(cfg, data, index):
    g = get_smoothing_kernel(cfg.kernel_g)
    k = cfg.k
    if k is None:
        k = cv_select_k(data, CvConfig(cfg.k_max, g), threads=1).k_best
    b = cfg.b
    if b is None:
        vb = VbConfig(
            q=cfg.vb.q,
            gamma=cfg.vb.gamma,
            iterations=cfg.vb.iterations,
            pilot=cfg.vb.pilot,
            reps=cfg.vb.reps,
            seed=derive_seed(cfg.seed, BOOTSTRAP_SEED, index, 1),
            kernel=get_variance_kernel(cfg.kernel_k),
            sqrt_mode=cfg.sqrt_mode,
        )
        b = select_variance_bandwidth(data, k, vb, smoothing_kernel=g, threads=1).b_best
    return int(k), float(b)


def _bootstrap_config(cfg, k, b, mode, index):
    return BootstrapConfig(
        reps=cfg.boot_reps,
        alpha=cfg.alpha,
        mode=mode,
        seed=derive_seed(cfg.seed, BOOTSTRAP_SEED, index),
        hac=HacConfig(b, get_variance_kernel(cfg.kernel_k)),
        smoother=SmootherConfig(k, get_smoothing_kernel(cfg.kernel_g)),
        sqrt_mode=cfg.sqrt_mode,
    )


def coverage_simulation(cfg, index):
    """
    One coverage simulation: does every interval cover the true mean?

    Returns:
        dict with the index, bandwidths used and per-mode coverage and width
    """
    data = simulate_dataset(cfg.mean, cfg.noise, cfg.n, cfg.m, derive_seed(cfg.seed, SIMULATION, index))
    k, b = _bandwidths(cfg, data, index)
    grid = make_position_grid(cfg.n, cfg.m, k, cfg.grid_divisions)
    x, y = grid.coordinates()
    truth = mean_value(cfg.mean, x, y)
    modes = {}
    for mode in cfg.modes:
        result = run_lwmb(data, grid, _bootstrap_config(cfg, k, b, mode, index), threads=1)
        covered = bool(np.all(np.abs(result.estimates.estimates - truth) <= result.half_widths))
        modes[mode.value] = {'covered': covered, 'width': float(np.mean(2.0 * result.half_widths))}
    return {'index': index, 'k': k, 'b': b, 'modes': modes}


def size_power_simulation(cfg, index):
    """
    One size/power simulation: test mu = 0 under the zero and the disc mean.

    Returns:
        dict with the index and per-hypothesis, per-mode rejections
    """
    seed = derive_seed(cfg.seed, SIMULATION, index)
    disc = cfg.mean if cfg.mean.kind == MeanFieldKind.DISC else MeanField(MeanFieldKind.DISC)
    record = {'index': index, 'hypotheses': {}}
    for hypothesis, mean in ((Hypothesis.NULL, MeanField(MeanFieldKind.ZERO)), (Hypothesis.ALTERNATIVE, disc)):
        data = simulate_dataset(mean, cfg.noise, cfg.n, cfg.m, seed)
        k, b = _bandwidths(cfg, data, index)
        grid = make_position_grid(cfg.n, cfg.m, k, cfg.grid_divisions)
        rejects = {}
        for mode in cfg.modes:
            result = run_lwmb(data, grid, _bootstrap_config(cfg, k, b, mode, index), threads=1)
            rejects[mode.value] = test_mean(result, lambda x, y: 0.0).reject
        record['hypotheses'][hypothesis.value] = {'k': k, 'b': b, 'rejects': rejects}
    return record


def _dispatch(task, cfg):
    payload = cfg.to_dict()
    signatures = [task.s(payload, index) for index in range(cfg.sims)]
    if getattr(settings, 'CELERY_TASK_ALWAYS_EAGER', True):
        return [signature.apply().get() for signature in signatures]
    return group(signatures).apply_async().get()


def _bandwidth_label(fixed):
    return 'auto' if fixed is None else f"{fixed:g}"


def coverage_study(cfg):
    """
    Simultaneous coverage and mean full width for every mode.

    Returns:
        StudyResult with COVERAGE_HEADER rows
    """
    from apps.simulate.tasks import run_coverage_simulation

    logger.info(f"Coverage study: {cfg.sims} sims of {cfg.mean.kind} + {cfg.noise} on {cfg.n}x{cfg.m}")
    sims = sorted(_dispatch(run_coverage_simulation, cfg), key=lambda record: record['index'])
    rows = []
    for mode in cfg.modes:
        covered = [record['modes'][mode.value]['covered'] for record in sims]
        widths = [record['modes'][mode.value]['width'] for record in sims]
        rows.append([
            cfg.mean.kind.value,
            cfg.noise.value,
            _bandwidth_label(cfg.k),
            _bandwidth_label(cfg.b),
            cfg.grid_divisions,
            mode.value,
            float(np.mean(covered)),
            float(np.mean(widths)),
        ])
    return StudyResult(kind=StudyKind.COVERAGE, header=COVERAGE_HEADER, rows=rows, sims=sims)


def size_power_study(cfg):
    """
    Rejection rates of H0: mu = 0 under the zero (size) and disc (power) means.

    Returns:
        StudyResult with SIZE_POWER_HEADER rows
    """
    from apps.simulate.tasks import run_size_power_simulation

    logger.info(f"Size/power study: {cfg.sims} sims of {cfg.noise} noise on {cfg.n}x{cfg.m}")
    sims = sorted(_dispatch(run_size_power_simulation, cfg), key=lambda record: record['index'])
    rows = []
    for hypothesis in Hypothesis:
        for mode in cfg.modes:
            rejects = [record['hypotheses'][hypothesis.value]['rejects'][mode.value] for record in sims]
            rows.append([cfg.noise.value, hypothesis.value, mode.value, float(np.mean(rejects))])
    return StudyResult(kind=StudyKind.SIZE_POWER, header=SIZE_POWER_HEADER, rows=rows, sims=sims)


def write_study_csv(result, path):
    """Write a study table; rates and widths with six decimals."""
    try:
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(result.header)
            for row in result.rows:
                writer.writerow([f"{value:.6f}" if isinstance(value, float) else value for value in row])
    except OSError as e:
        raise GridIOError(f"cannot write study table {path}: {e}") from e
