"""
Mean fields, heterogeneous noise fields and simulated datasets.
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.db import models
from scipy import signal

from apps.grid.exceptions import ConfigError
from apps.grid.services import Field
from apps.grid.streams import NOISE, NOISE_ROW, stream

logger = logging.getLogger(__name__)

# Row streams are keyed by absolute row index; margin rows have index <= 0.
ROW_KEY_OFFSET = 2 ** 32

AR_COEFFICIENTS = (0.3, -0.4, -0.2)
MA_COEFFICIENTS = (0.3, -0.4, -0.2)


class MeanFieldKind(models.TextChoices):
    """Mean field choices."""
    ZERO = 'zero', 'Zero'
    ELLIPTICAL = 'elliptical', 'Elliptical paraboloid'
    SINUSOIDAL = 'sinusoidal', 'Sinusoidal'
    DISC = 'disc', 'Disc signal'


class NoiseKind(models.TextChoices):
    """Noise field choices."""
    IID_NORMAL = 'normal', 'I.i.d. standard normal'
    AR2D = 'ar', '2-D autoregressive'
    MA2D = 'ma', '2-D moving average'


NOISE_CODES = {NoiseKind.IID_NORMAL: 0, NoiseKind.AR2D: 1, NoiseKind.MA2D: 2}


@dataclass(frozen=True)
class MeanField:
    """
    Mean field with its parameters.

    Attributes:
        kind: MeanFieldKind
        height: disc height
        radius: disc radius
        center: disc center (x, y)
    """
    kind: str = MeanFieldKind.ZERO
    height: float = 0.3
    radius: float = 0.1
    center: tuple = (0.5, 0.5)

    def __post_init__(self):
        object.__setattr__(self, 'kind', MeanFieldKind(self.kind))
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        if self.kind == MeanFieldKind.DISC and not self.radius > 0:
            raise ConfigError(f"disc radius must be positive, got {self.radius}")


def mean_value(mean, x, y):
    """
    Mean field at coordinates (x, y); arrays broadcast.

    Args:
        mean: MeanField or MeanFieldKind value
    """
    if not isinstance(mean, MeanField):
        mean = MeanField(mean)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if mean.kind == MeanFieldKind.ZERO:
        values = np.zeros(np.broadcast(x, y).shape)
    elif mean.kind == MeanFieldKind.ELLIPTICAL:
        values = 1.0 - (1.5 * (x - 0.5) ** 2 + 6.0 * (y - 0.5) ** 2)
    elif mean.kind == MeanFieldKind.SINUSOIDAL:
        a = np.sin(2.0 * (x - 0.6))
        b = np.cos(3.0 * (y - 0.3))
        values = a ** 2 + b ** 2 + a * b
    else:
        cx, cy = mean.center
        inside = (x - cx) ** 2 + (y - cy) ** 2 <= mean.radius ** 2
        values = np.where(inside, mean.height, 0.0)
    return float(values) if values.ndim == 0 else values


def mean_lattice(mean, n, m):
    """Mean field on the lattice (i/n, j/m), i = 1..n, j = 1..m."""
    x = np.arange(1, n + 1)[:, None] / n
    y = np.arange(1, m + 1)[None, :] / m
    return np.broadcast_to(mean_value(mean, x, y), (n, m)).astype(np.float64)


def _distance(rows, cols, n, m):
    return np.abs(rows[:, None] / n - cols[None, :] / m)


def _ar_row_innovations(seed, row, cols, n, m, margin):
    """Product-normal innovations of one extended row, main columns drawn first."""
    rng = stream(seed, NOISE_ROW, NOISE_CODES[NoiseKind.AR2D], row + ROW_KEY_OFFSET)
    main = rng.standard_normal((m, 2))
    extra = rng.standard_normal((margin, 2))[::-1]
    z = np.concatenate([extra, main])
    d = np.abs(row / n - cols / m)
    return (0.7 + 0.5 * d) * z[:, 0] * (0.5 + 0.7 * d) * z[:, 1]


def ar_noise(n, m, seed, margin=None):
    """
    2-D autoregressive noise

        e(i, j) = 0.3 e(i-1, j) - 0.4 e(i, j-1) - 0.2 e(i-1, j-1) + E1 E2

    on a lattice extended by `margin` cells to the top and left, started
    from zeros; the margin is discarded. Innovations depend only on the
    absolute cell, so a wider margin changes the retained field only
    through the initial condition.
    """
    if margin is None:
        margin = getattr(settings, 'FIELDINFER_AR_BURN_IN', 200)
    margin = int(margin)
    if margin < 0:
        raise ConfigError(f"burn-in margin must be >= 0, got {margin}")
    a_up, a_left, a_diag = AR_COEFFICIENTS
    cols = np.arange(1 - margin, m + 1, dtype=np.float64)
    previous = np.zeros(m + margin)
    out = np.empty((n, m))
    for row in range(1 - margin, n + 1):
        e = _ar_row_innovations(seed, row, cols, n, m, margin)
        shifted = np.concatenate([[0.0], previous[:-1]])
        u = a_up * previous + a_diag * shifted + e
        # e(i, j) - a_left e(i, j-1) = u(j)
        current = signal.lfilter([1.0], [1.0, -a_left], u)
        if row >= 1:
            out[row - 1] = current[margin:]
        previous = current
    return out


def ma_noise(n, m, seed):
    """
    2-D moving-average noise

        e(i, j) = 0.3 f(i-1, j) - 0.4 f(i, j-1) - 0.2 f(i-1, j-1) + f(i, j)

    with f = F1 F2 and f = 0 outside the lattice.
    """
    rng = stream(seed, NOISE, NOISE_CODES[NoiseKind.MA2D])
    z = rng.standard_normal((2, n, m))
    d = _distance(np.arange(1, n + 1), np.arange(1, m + 1), n, m)
    f = np.zeros((n + 1, m + 1))
    f[1:, 1:] = (1.2 - 0.5 * d) * z[0] * (1.2 - 0.7 * d) * z[1]
    b_up, b_left, b_diag = MA_COEFFICIENTS
    return f[1:, 1:] + b_up * f[:-1, 1:] + b_left * f[1:, :-1] + b_diag * f[:-1, :-1]


def simulate_noise(kind, n, m, seed, margin=None):
    """
    Noise field of the given kind, deterministic in (kind, n, m, seed).

    Args:
        kind: NoiseKind
        n: rows
        m: columns
        seed: master seed
        margin: AR burn-in margin (FIELDINFER_AR_BURN_IN when None)

    Returns:
        Field
    """
    kind = NoiseKind(kind)
    if n < 1 or m < 1:
        raise ConfigError(f"noise field needs n, m >= 1, got {n}x{m}")
    if kind == NoiseKind.AR2D:
        values = ar_noise(n, m, seed, margin)
    elif kind == NoiseKind.MA2D:
        values = ma_noise(n, m, seed)
    else:
        values = stream(seed, NOISE, NOISE_CODES[kind]).standard_normal((n, m))
    logger.debug(f"Simulated {kind.label} noise {n}x{m} with seed {seed}")
    return Field(values)


def simulate_dataset(mean, noise, n, m, seed, noise_scale=1.0):
    """X(i, j) = mu(i/n, j/m) + noise_scale * noise(i, j)."""
    noise_field = simulate_noise(noise, n, m, seed)
    values = mean_lattice(mean, n, m)
    if noise_scale:
        values = values + noise_scale * noise_field.values
    return Field(values)
