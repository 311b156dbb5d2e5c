"""
Nadaraya-Watson mean-field estimation on the lattice.

The product kernel G((i - p) / K) G((j - q) / K) is separable, so window
sums are computed as a pass over rows followed by a pass over columns.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from apps.grid.exceptions import BandwidthTooLargeError, BoundaryError, ConfigError
from apps.kernels.services import DEFAULT_SMOOTHING_KERNEL, SmoothingKernel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmootherConfig:
    """
    Smoothing configuration.

    Attributes:
        bandwidth: integer half-width K of the window, in lattice cells
        kernel: SmoothingKernel G
    """
    bandwidth: int
    kernel: SmoothingKernel = DEFAULT_SMOOTHING_KERNEL

    def __post_init__(self):
        if int(self.bandwidth) != self.bandwidth or self.bandwidth < 1:
            raise ConfigError(f"smoothing bandwidth must be a positive integer, got {self.bandwidth}")
        object.__setattr__(self, 'bandwidth', int(self.bandwidth))

    @property
    def width(self):
        return 2 * self.bandwidth + 1


@functools.lru_cache(maxsize=128)
def kernel_weights(cfg):
    """One-dimensional weights G(u / K), u = -K..K (read-only)."""
    offsets = np.arange(-cfg.bandwidth, cfg.bandwidth + 1, dtype=np.float64)
    g = np.asarray(cfg.kernel(offsets / cfg.bandwidth), dtype=np.float64)
    g.setflags(write=False)
    return g


def smoothing_constants(cfg):
    """
    Window constants of the product kernel.

    Returns:
        (T_nm, B_nm) with T_nm = sum G G and B_nm = sqrt(sum G^2 G^2)
    """
    g = kernel_weights(cfg)
    total = float(g.sum())
    return total * total, float(np.sum(g * g))


def window_slices(p, q, k):
    """0-based slices of the (2k+1)^2 window anchored at 1-based (p, q)."""
    return slice(p - k - 1, p + k), slice(q - k - 1, q + k)


def _check_window(p, q, k, n, m):
    if not (k + 1 <= p <= n - k and k + 1 <= q <= m - k):
        raise BoundaryError(
            f"window of half-width {k} at (p={p}, q={q}) leaves the {n}x{m} lattice",
            positions=[(p, q)],
        )


def window_sums(values, g):
    """
    Separable weighted window sums over every full window.

    Returns:
        array of shape (n - w + 1, m - w + 1), w = len(g)
    """
    w = g.size
    rows = sliding_window_view(values, w, axis=0) @ g
    return sliding_window_view(rows, w, axis=1) @ g


@dataclass(frozen=True, eq=False)
class MeanSurface:
    """
    Estimated mean over the interior lattice.

    Attributes:
        values: (n - 2K) x (m - 2K) array; values[i-K-1, j-K-1] = mu_hat(i/n, j/m)
        bandwidth: smoothing bandwidth K
        n: field rows
        m: field columns
    """
    values: np.ndarray
    bandwidth: int
    n: int
    m: int

    def at(self, i, j):
        """Estimate at 1-based interior lattice point (i, j)."""
        k = self.bandwidth
        _check_window(i, j, k, self.n, self.m)
        return float(self.values[i - k - 1, j - k - 1])


@dataclass(frozen=True, eq=False)
class ResidualField:
    """
    Residuals on the interior lattice, exact zeros outside.

    Attributes:
        values: n x m residual array
        mask: n x m boolean array, True where the residual is defined
        bandwidth: smoothing bandwidth that produced the residuals (0 for raw noise)
    """
    values: np.ndarray
    mask: np.ndarray
    bandwidth: int = 0

    def __post_init__(self):
        for name in ('values', 'mask'):
            getattr(self, name).setflags(write=False)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_noise(cls, values):
        """Residual surrogate built directly from a noise array."""
        values = np.array(values, dtype=np.float64)
        return cls(values=values, mask=np.ones(values.shape, dtype=bool), bandwidth=0)

    def covers(self, rows, cols):
        """True if every cell of the window slices is defined."""
        n, m = self.shape
        if rows.start < 0 or cols.start < 0 or rows.stop > n or cols.stop > m:
            return False
        return bool(self.mask[rows, cols].all())

    def interior(self):
        """Residual values on the defined region, flattened."""
        return self.values[self.mask]


@dataclass(frozen=True, eq=False)
class WindowWeights:
    """
    Normalized window weights c = G G / B_nm at one position.

    Attributes:
        p: row anchor
        q: column anchor
        bandwidth: smoothing bandwidth K
        block: (2K+1) x (2K+1) weights, block[u+K, v+K] for offsets (u, v)
        n: field rows
        m: field columns
    """
    p: int
    q: int
    bandwidth: int
    block: np.ndarray
    n: int
    m: int

    @property
    def slices(self):
        return window_slices(self.p, self.q, self.bandwidth)

    def items(self):
        """Yield (i, j, c) over the window with 1-based lattice indices."""
        k = self.bandwidth
        for u in range(-k, k + 1):
            for v in range(-k, k + 1):
                yield self.p + u, self.q + v, float(self.block[u + k, v + k])

    def dense(self):
        """Weights on the full n x m lattice."""
        full = np.zeros((self.n, self.m))
        full[self.slices] = self.block
        return full


@dataclass(frozen=True, eq=False)
class EstimateSet:
    """
    Estimates at a grid of positions.

    Attributes:
        positions: PositionGrid
        estimates: length-V array of mu_hat(x_v, y_v)
        t_nm: kernel sum T_nm
        b_nm: kernel norm B_nm
        bandwidth: smoothing bandwidth K
        kernel_name: smoothing kernel name
    """
    positions: object
    estimates: np.ndarray
    t_nm: float
    b_nm: float
    bandwidth: int
    kernel_name: str


def nw_estimate(field, pos, cfg):
    """
    Nadaraya-Watson estimate at one position.

    Args:
        field: Field
        pos: Position with K+1 <= p <= n-K and K+1 <= q <= m-K
        cfg: SmootherConfig

    Returns:
        sum X G G / sum G G over the (2K+1)^2 window
    """
    k = cfg.bandwidth
    _check_window(pos.p, pos.q, k, field.n, field.m)
    g = kernel_weights(cfg)
    rows, cols = window_slices(pos.p, pos.q, k)
    t_nm, _ = smoothing_constants(cfg)
    return float((g @ field.values[rows, cols]) @ g / t_nm)


def nw_surface(field, cfg):
    """
    Estimates at every interior lattice point i in [K+1, n-K], j in [K+1, m-K].

    Returns:
        MeanSurface
    """
    k = cfg.bandwidth
    if field.n < cfg.width or field.m < cfg.width:
        raise BandwidthTooLargeError(
            f"window of width {cfg.width} does not fit a {field.n}x{field.m} field"
        )
    t_nm, _ = smoothing_constants(cfg)
    values = window_sums(field.values, kernel_weights(cfg)) / t_nm
    values.setflags(write=False)
    return MeanSurface(values=values, bandwidth=k, n=field.n, m=field.m)


def residual_field(field, cfg):
    """
    Residuals X - mu_hat on the interior lattice, zeros and mask outside.
    """
    surface = nw_surface(field, cfg)
    k = cfg.bandwidth
    inner = (slice(k, field.n - k), slice(k, field.m - k))
    values = np.zeros(field.shape)
    values[inner] = field.values[inner] - surface.values
    mask = np.zeros(field.shape, dtype=bool)
    mask[inner] = True
    return ResidualField(values=values, mask=mask, bandwidth=k)


def window_weights(pos, cfg, n, m):
    """
    Normalized weights c = G((i-p)/K) G((j-q)/K) / B_nm on the window.

    Returns:
        WindowWeights whose squared weights sum to 1
    """
    k = cfg.bandwidth
    _check_window(pos.p, pos.q, k, n, m)
    g = kernel_weights(cfg)
    _, b_nm = smoothing_constants(cfg)
    block = np.outer(g, g) / b_nm
    block.setflags(write=False)
    return WindowWeights(p=pos.p, q=pos.q, bandwidth=k, block=block, n=n, m=m)


def estimate_positions(field, grid, cfg):
    """
    Estimates at every position of a grid.

    Returns:
        EstimateSet
    """
    estimates = np.array([nw_estimate(field, pos, cfg) for pos in grid])
    t_nm, b_nm = smoothing_constants(cfg)
    logger.debug(f"Estimated mean at {grid.V} positions with K={cfg.bandwidth}")
    return EstimateSet(
        positions=grid,
        estimates=estimates,
        t_nm=t_nm,
        b_nm=b_nm,
        bandwidth=cfg.bandwidth,
        kernel_name=cfg.kernel.name,
    )
