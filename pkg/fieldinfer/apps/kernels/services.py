"""
Smoothing kernels G and variance kernels K.

G weights the Nadaraya-Watson window and lives on [-1, 1]. K weights
covariance lags in the HAC estimator and generates the Toeplitz matrices
of the bootstrap; it must be symmetric, equal 1 at 0, non-increasing on
[0, inf) and have a nonnegative Fourier transform.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from django.db import models
from scipy import fft as sp_fft
from scipy.integrate import trapezoid

from apps.grid.exceptions import ConfigError

logger = logging.getLogger(__name__)

DFT_TOLERANCE = 1e-8
SHAPE_TOLERANCE = 1e-12


class SmoothingKernelId(models.TextChoices):
    """Smoothing kernel choices."""
    QUARTIC = 'quartic', 'Quartic (1 - x^2)^2'
    TRIANGULAR = 'triangular', 'Triangular 1 - |x|'
    UNIFORM = 'uniform', 'Uniform'
    TABULATED = 'tabulated', 'Custom tabulated'


class VarianceKernelId(models.TextChoices):
    """Variance kernel choices."""
    GAUSSIAN = 'gaussian', 'Gaussian exp(-x^2 / 2)'
    BARTLETT = 'bartlett', 'Bartlett max(0, 1 - |x|)'
    PARZEN = 'parzen', 'Parzen'
    CUSTOM = 'custom', 'Custom'


def _as_output(x, values):
    values = np.asarray(values, dtype=np.float64)
    return float(values) if np.ndim(x) == 0 else values


@dataclass(frozen=True)
class SmoothingKernel:
    """
    Smoothing kernel G on [-1, 1], zero outside.

    Attributes:
        name: registry or user name
        kind: SmoothingKernelId
        profile: vectorized map a -> G(a) for a in [0, 1]
        nodes: (xs, gs) tuples for tabulated kernels, empty otherwise
    """
    name: str
    kind: str
    profile: Callable
    nodes: tuple = field(default=(), compare=False)

    def __call__(self, x):
        a = np.abs(np.asarray(x, dtype=np.float64))
        inside = a <= 1.0
        values = np.where(inside, self.profile(np.minimum(a, 1.0)), 0.0)
        return _as_output(x, values)

    @classmethod
    def tabulated(cls, name, xs, gs):
        """
        Piecewise-linear kernel through nodes (xs, gs) on [0, 1], mirrored.

        Args:
            name: kernel name
            xs: increasing nodes starting at 0 and ending at 1
            gs: kernel values at the nodes

        Raises:
            ConfigError: nodes malformed or the kernel fails validation
        """
        xs = np.asarray(xs, dtype=np.float64)
        gs = np.asarray(gs, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != gs.shape or xs.size < 2:
            raise ConfigError(f"tabulated kernel {name!r} needs matching 1-D node arrays")
        if xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0):
            raise ConfigError(f"tabulated kernel {name!r} nodes must increase from 0 to 1")
        xs_t, gs_t = tuple(xs.tolist()), tuple(gs.tolist())
        kernel = cls(
            name=name,
            kind=SmoothingKernelId.TABULATED,
            profile=lambda a: np.interp(a, xs_t, gs_t),
            nodes=(xs_t, gs_t),
        )
        report = validate_smoothing_kernel(kernel)
        if not report.passed:
            raise ConfigError(f"tabulated kernel {name!r} is invalid: {'; '.join(report.messages)}")
        return kernel


@dataclass(frozen=True)
class VarianceKernel:
    """
    Variance kernel K on the real line.

    Attributes:
        name: registry or user name
        kind: VarianceKernelId
        func: vectorized map x -> K(x)
    """
    name: str
    kind: str
    func: Callable

    def __call__(self, x):
        return _as_output(x, self.func(np.asarray(x, dtype=np.float64)))

    @classmethod
    def custom(cls, name, func):
        """Wrap a user function; it must accept numpy arrays."""
        return cls(name=name, kind=VarianceKernelId.CUSTOM, func=func)


def _parzen(x):
    a = np.abs(x)
    inner = 1.0 - 6.0 * a ** 2 + 6.0 * a ** 3
    outer = 2.0 * np.clip(1.0 - a, 0.0, None) ** 3
    return np.where(a <= 0.5, inner, outer)


QUARTIC = SmoothingKernel('quartic', SmoothingKernelId.QUARTIC, lambda a: (1.0 - a ** 2) ** 2)
TRIANGULAR = SmoothingKernel('triangular', SmoothingKernelId.TRIANGULAR, lambda a: 1.0 - a)
UNIFORM = SmoothingKernel('uniform', SmoothingKernelId.UNIFORM, lambda a: np.ones_like(a))

GAUSSIAN = VarianceKernel('gaussian', VarianceKernelId.GAUSSIAN, lambda x: np.exp(-0.5 * x ** 2))
BARTLETT = VarianceKernel('bartlett', VarianceKernelId.BARTLETT, lambda x: np.clip(1.0 - np.abs(x), 0.0, None))
PARZEN = VarianceKernel('parzen', VarianceKernelId.PARZEN, _parzen)

SMOOTHING_KERNELS = {k.name: k for k in (QUARTIC, TRIANGULAR, UNIFORM)}
VARIANCE_KERNELS = {k.name: k for k in (GAUSSIAN, BARTLETT, PARZEN)}

DEFAULT_SMOOTHING_KERNEL = QUARTIC
DEFAULT_VARIANCE_KERNEL = GAUSSIAN


def get_smoothing_kernel(name):
    """Look up a built-in smoothing kernel by name."""
    try:
        return SMOOTHING_KERNELS[name]
    except KeyError:
        raise ConfigError(
            f"unknown smoothing kernel {name!r}; choose from {', '.join(SMOOTHING_KERNELS)}"
        ) from None


def get_variance_kernel(name):
    """Look up a built-in variance kernel by name."""
    try:
        return VARIANCE_KERNELS[name]
    except KeyError:
        raise ConfigError(
            f"unknown variance kernel {name!r}; choose from {', '.join(VARIANCE_KERNELS)}"
        ) from None


def eval_smoothing(g, x):
    """G(x) for |x| <= 1, 0 outside."""
    return g(x)


def eval_variance(k, x):
    """K(x)."""
    return k(x)


@dataclass
class ValidityReport:
    """
    Outcome of a kernel validity check.

    Attributes:
        kernel: kernel name
        checks: check name -> outcome
        min_dft: smallest sampled DFT coefficient (variance kernels only)
        integrals: numerically estimated integrals over [0, extent]
        messages: one line per failed check
    """
    kernel: str
    checks: dict = field(default_factory=dict)
    min_dft: float = None
    integrals: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        """For variance kernels, the Fourier criterion; otherwise every check."""
        if 'fourier' in self.checks:
            return self.checks['fourier']
        return all(self.checks.values())

    @property
    def all_passed(self):
        return all(self.checks.values())

    def record(self, name, ok, message):
        self.checks[name] = bool(ok)
        if not ok:
            self.messages.append(message)


def validate_smoothing_kernel(g, samples=2001):
    """
    Check G(0) = 1, G >= 0, symmetry and monotonicity on [0, 1].

    Returns:
        ValidityReport
    """
    report = ValidityReport(kernel=g.name)
    a = np.linspace(0.0, 1.0, samples)
    values = np.asarray(g(a))
    report.record('unit_at_zero', abs(float(g(0.0)) - 1.0) <= SHAPE_TOLERANCE, 'G(0) != 1')
    report.record('nonnegative', np.all(values >= 0.0), 'G takes negative values')
    report.record(
        'symmetric',
        np.max(np.abs(values - np.asarray(g(-a)))) <= SHAPE_TOLERANCE,
        'G is not symmetric',
    )
    report.record('monotone', np.all(np.diff(values) <= SHAPE_TOLERANCE), 'G increases somewhere on [0, 1]')
    return report


def validate_variance_kernel(k, grid_points=4096, extent=20.0):
    """
    Numerically check the variance-kernel conditions.

    K is sampled on [-extent, extent) with wrap-around ordering and the
    real DFT of the samples must stay >= -1e-8. Symmetry, range, K(0) = 1,
    monotonicity on [0, extent] and the two integrals are reported too.

    Args:
        k: VarianceKernel
        grid_points: number of samples (>= 256)
        extent: half-width of the sampling window (> 0)

    Returns:
        ValidityReport
    """
    if grid_points < 256:
        raise ConfigError(f"grid_points must be >= 256, got {grid_points}")
    if extent <= 0:
        raise ConfigError(f"extent must be positive, got {extent}")

    report = ValidityReport(kernel=k.name)
    h = 2.0 * extent / grid_points
    t = np.arange(grid_points)
    xs = np.where(t < grid_points // 2, t, t - grid_points) * h
    samples = np.asarray(k(xs), dtype=np.float64)

    coefficients = sp_fft.fft(samples).real
    report.min_dft = float(coefficients.min())
    report.record(
        'fourier',
        report.min_dft >= -DFT_TOLERANCE,
        f'sampled Fourier transform goes negative (min {report.min_dft:.3e})',
    )

    half = np.linspace(0.0, extent, grid_points // 2 + 1)
    positive = np.asarray(k(half), dtype=np.float64)
    report.record('unit_at_zero', abs(float(k(0.0)) - 1.0) <= SHAPE_TOLERANCE, 'K(0) != 1')
    report.record('range', np.all((samples >= 0.0) & (samples <= 1.0)), 'K leaves [0, 1]')
    report.record(
        'symmetric',
        np.max(np.abs(positive - np.asarray(k(-half)))) <= SHAPE_TOLERANCE,
        'K is not symmetric',
    )
    report.record('monotone', np.all(np.diff(positive) <= SHAPE_TOLERANCE), 'K increases somewhere on [0, extent]')

    report.integrals = {
        'k_squared': float(trapezoid(positive ** 2, half)),
        'x_times_k': float(trapezoid(half * positive, half)),
    }
    report.record(
        'integrable',
        all(np.isfinite(v) for v in report.integrals.values()) and positive[-1] <= 1e-6,
        f'K has not decayed by x={extent} (K={positive[-1]:.3e})',
    )

    if not report.passed:
        logger.warning(f"Variance kernel {k.name} failed validation: {'; '.join(report.messages)}")
    return report
