"""
Kernel-weighted (HAC) covariance of window-weighted residual sums.

For weight sets c1, c2 and residuals e the estimator is

    sum c1(i1, j1) c2(i2, j2) e(i1, j1) e(i2, j2) K((i1 - i2) / B) K((j1 - j2) / B)

evaluated as a sum over lags: the cross-correlation of the two weighted
residual blocks at every lag (s, t), times the kernel weight of that lag.
Lags whose kernel product is at most LAG_TRUNCATION in magnitude are dropped.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from django.db import models
from scipy import signal

from apps.grid.exceptions import BoundaryError, ConfigError, ShapeError
from apps.kernels.services import DEFAULT_VARIANCE_KERNEL, VarianceKernel

logger = logging.getLogger(__name__)

LAG_TRUNCATION = 1e-12
TAU_FLOOR = 1e-8


class BootstrapMode(models.TextChoices):
    """Scaling of the per-position bootstrap increments."""
    HOMOGENEOUS = 'homogeneous', 'Homogeneous (tau = 1)'
    HETEROGENEOUS = 'heterogeneous', 'Heterogeneous (tau = sigma^(1/3))'


@dataclass(frozen=True)
class HacConfig:
    """
    Variance bandwidth and kernel.

    Attributes:
        bandwidth: variance bandwidth B > 0
        kernel: VarianceKernel K
    """
    bandwidth: float
    kernel: VarianceKernel = DEFAULT_VARIANCE_KERNEL

    def __post_init__(self):
        if not float(self.bandwidth) > 0:
            raise ConfigError(f"variance bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, 'bandwidth', float(self.bandwidth))


class SigmaHat(NamedTuple):
    """Local standard deviation and whether the quadratic form was clipped."""
    value: float
    negative_variance: bool


def _weighted_block(res, weights):
    if res.shape != (weights.n, weights.m):
        raise ShapeError(f"weights for a {weights.n}x{weights.m} lattice do not fit residuals of shape {res.shape}")
    rows, cols = weights.slices
    if not res.covers(rows, cols):
        raise BoundaryError(
            f"window at (p={weights.p}, q={weights.q}) leaves the residual interior",
            positions=[(weights.p, weights.q)],
        )
    return weights.block * res.values[rows, cols]


def lag_weights(offset_rows, offset_cols, width, cfg):
    """
    Kernel products K((dp + s) / B) K((dq + t) / B) over window lags.

    Args:
        offset_rows: anchor difference p1 - p2
        offset_cols: anchor difference q1 - q2
        width: window width 2K + 1
        cfg: HacConfig

    Returns:
        (2w - 1) x (2w - 1) array indexed by (s + w - 1, t + w - 1), zeroed
        where the product is at most LAG_TRUNCATION in magnitude
    """
    lags = np.arange(-(width - 1), width, dtype=np.float64)
    row_k = cfg.kernel((offset_rows + lags) / cfg.bandwidth)
    col_k = cfg.kernel((offset_cols + lags) / cfg.bandwidth)
    product = np.outer(row_k, col_k)
    product[np.abs(product) <= LAG_TRUNCATION] = 0.0
    return product


def hac_cov(res, w1, w2, cfg):
    """
    HAC covariance of the weighted residual sums at two positions.

    Args:
        res: ResidualField
        w1: WindowWeights for the first position
        w2: WindowWeights for the second position (same bandwidth)
        cfg: HacConfig

    Returns:
        float

    Raises:
        BoundaryError: a window is not covered by the residual interior
    """
    if w1.block.shape != w2.block.shape:
        raise ShapeError(f"weight blocks differ in shape: {w1.block.shape} vs {w2.block.shape}")
    a1 = _weighted_block(res, w1)
    a2 = _weighted_block(res, w2)
    weights = lag_weights(w1.p - w2.p, w1.q - w2.q, a1.shape[0], cfg)
    if not weights.any():
        return 0.0
    # correlated[s + w - 1, t + w - 1] = sum a1[a, b] a2[a - s, b - t]
    correlated = signal.correlate2d(a1, a2, mode='full')
    return float(np.sum(weights * correlated))


def sigma_hat(res, w, cfg):
    """
    Local standard deviation sqrt(max(hac_cov(w, w), 0)).

    Returns:
        SigmaHat; negative_variance is True when clipping fired
    """
    variance = hac_cov(res, w, w, cfg)
    if variance < 0:
        logger.warning(
            f"Negative HAC variance {variance:.3e} at (p={w.p}, q={w.q}) "
            f"with {cfg.kernel.name} kernel, B={cfg.bandwidth}; clipped to 0"
        )
        return SigmaHat(0.0, True)
    return SigmaHat(float(np.sqrt(variance)), False)


def sigma_profile(res, weights, cfg):
    """
    sigma_hat at every position.

    Args:
        res: ResidualField
        weights: sequence of WindowWeights, one per position

    Returns:
        (sigma, flags) as float and bool arrays
    """
    values = [sigma_hat(res, w, cfg) for w in weights]
    sigma = np.array([v.value for v in values], dtype=np.float64)
    flags = np.array([v.negative_variance for v in values], dtype=bool)
    if flags.any():
        logger.warning(f"{int(flags.sum())} of {flags.size} local variances were clipped")
    return sigma, flags


def tau_hat(sigma, mode):
    """Per-position scale: 1 when homogeneous, max(sigma, 1e-8)^(1/3) otherwise."""
    if BootstrapMode(mode) == BootstrapMode.HOMOGENEOUS:
        return 1.0
    return float(np.cbrt(max(sigma, TAU_FLOOR)))
