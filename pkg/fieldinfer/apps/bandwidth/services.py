"""
Data-driven bandwidth selection.

The smoothing bandwidth K is picked by leave-one-out cross-validation.
The variance bandwidth B is picked by block subsampling: the bootstrap
variance of the residual grand mean on random small blocks is matched,
for every candidate B, against a full-field pilot value.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from apps.bootstrap.services import dependent_wild_field, resolve_threads, wild_noise_shape
from apps.grid.exceptions import BandwidthTooLargeError, BlockTooSmallError, ConfigError
from apps.grid.services import Field
from apps.grid.streams import BLOCK, BLOCK_REPLICATE, PILOT, stream
from apps.kernels.services import DEFAULT_SMOOTHING_KERNEL, DEFAULT_VARIANCE_KERNEL, SmoothingKernel, VarianceKernel
from apps.smoother.services import SmootherConfig, kernel_weights, residual_field, smoothing_constants, window_sums
from apps.toeplitz.services import SqrtMode, build_sqrt

logger = logging.getLogger(__name__)

DEFAULT_GAMMA = tuple(float(b) for b in range(1, 11))


@dataclass(frozen=True)
class CvConfig:
    """
    Cross-validation settings.

    Attributes:
        k_max: largest candidate smoothing bandwidth
        kernel: SmoothingKernel G
    """
    k_max: int
    kernel: SmoothingKernel = DEFAULT_SMOOTHING_KERNEL

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError(f"k_max must be a positive integer, got {self.k_max}")
        object.__setattr__(self, 'k_max', int(self.k_max))


@dataclass(frozen=True)
class VbConfig:
    """
    Variance-bandwidth selection settings.

    Attributes:
        q: block fraction in (0, 1)
        gamma: candidate variance bandwidths
        iterations: number of random blocks H
        pilot: pilot variance bandwidth for the full-field reference
        reps: bootstrap replicates per variance estimate
        seed: master seed
        kernel: VarianceKernel K
        sqrt_mode: SqrtMode for the Toeplitz roots
    """
    q: float = 0.1
    gamma: tuple = DEFAULT_GAMMA
    iterations: int = 15
    pilot: float = 5.0
    reps: int = 200
    seed: int = 0
    kernel: VarianceKernel = DEFAULT_VARIANCE_KERNEL
    sqrt_mode: str = SqrtMode.AUTO

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"block fraction q must be in (0, 1), got {self.q}")
        gamma = tuple(float(b) for b in self.gamma)
        if not gamma or min(gamma) <= 0:
            raise ConfigError(f"candidate set must be non-empty and positive, got {self.gamma}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.reps < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.reps}")
        if not self.pilot > 0:
            raise ConfigError(f"pilot bandwidth must be positive, got {self.pilot}")
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'sqrt_mode', SqrtMode(self.sqrt_mode))

    @property
    def candidates(self):
        """Sorted distinct candidates; ties in the loss go to the first."""
        return tuple(sorted(set(self.gamma)))


@dataclass(frozen=True)
class CvSelection:
    """Chosen K and the leave-one-out error of every evaluated candidate."""
    k_best: int
    scores: dict


@dataclass(frozen=True)
class VbSelection:
    """
    Chosen B and the selection diagnostics.

    Attributes:
        b_best: selected variance bandwidth
        losses: {B: sum over blocks of (tau2 - sigma2)^2}
        sigma2: full-field pilot bootstrap variance
        corners: (u, v) block corners, 1-based
    """
    b_best: float
    losses: dict
    sigma2: float
    corners: tuple


def loo_error(field, k, kernel=DEFAULT_SMOOTHING_KERNEL):
    """
    Leave-one-out squared error for one smoothing bandwidth.

    The window sum without its center, divided by the full T_nm, predicts
    X at every i in [2K+1, n-2K], j in [2K+1, m-2K].
    """
    cfg = SmootherConfig(k, kernel)
    g = kernel_weights(cfg)
    t_nm, _ = smoothing_constants(cfg)
    n, m = field.shape
    sums = window_sums(field.values, g)
    center = g[k] * g[k]
    observed = field.values[2 * k:n - 2 * k, 2 * k:m - 2 * k]
    predicted = (sums[k:n - 3 * k, k:m - 3 * k] - center * observed) / t_nm
    return float(np.sum((observed - predicted) ** 2))


def cv_select_k(field, cfg, threads=None):
    """
    Smoothing bandwidth minimizing the leave-one-out error over 1..k_max.

    Candidates too wide for the field are skipped with a warning.

    Returns:
        CvSelection (ties go to the smallest K)

    Raises:
        BandwidthTooLargeError: no candidate fits the field
    """
    candidates = []
    for k in range(1, cfg.k_max + 1):
        if field.n < 4 * k + 2 or field.m < 4 * k + 2:
            logger.warning(f"Skipping K={k}: a {field.n}x{field.m} field needs at least {4 * k + 2} per side")
            continue
        candidates.append(k)
    if not candidates:
        raise BandwidthTooLargeError(f"no smoothing bandwidth in 1..{cfg.k_max} fits a {field.n}x{field.m} field")

    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
        errors = list(executor.map(lambda k: loo_error(field, k, cfg.kernel), candidates))
    scores = dict(zip(candidates, errors))
    k_best = candidates[int(np.argmin(errors))]
    logger.info(f"Cross-validation selected K={k_best} from {len(candidates)} candidates")
    return CvSelection(k_best=k_best, scores=scores)


def perturbed_residual_mean(res, qn, qm, e):
    """
    Grand mean over the residual interior of e_hat * (Q_n E Q_m).

    This is the bootstrap residual mean that both the pilot and the block
    variances are computed from.
    """
    z = dependent_wild_field(qn, qm, e)
    return float(np.mean(res.values[res.mask] * z[res.mask]))


def _bootstrap_variance(res, qn, qm, draws):
    means = np.array([perturbed_residual_mean(res, qn, qm, e) for e in draws])
    return float(np.var(means))


def block_size(n, m, q):
    """Block dimensions (floor(q n) + 1, floor(q m) + 1)."""
    return int(np.floor(q * n)) + 1, int(np.floor(q * m)) + 1


def select_variance_bandwidth(field, k, cfg, smoothing_kernel=DEFAULT_SMOOTHING_KERNEL, threads=None):
    """
    Variance bandwidth minimizing the block-subsampling loss.

    Args:
        field: Field
        k: smoothing bandwidth used for residuals
        cfg: VbConfig
        smoothing_kernel: SmoothingKernel G
        threads: block workers (FIELDINFER_THREADS when None)

    Returns:
        VbSelection

    Raises:
        BlockTooSmallError: the blocks cannot host a (2K+1)-wide window
    """
    n, m = field.shape
    n0, m0 = block_size(n, m, cfg.q)
    smoother = SmootherConfig(k, smoothing_kernel)
    if n0 < smoother.width or m0 < smoother.width or n0 >= n or m0 >= m:
        raise BlockTooSmallError(
            f"blocks of {n0}x{m0} cells cannot host a window of width {smoother.width} "
            f"inside a {n}x{m} field; choose a larger q (now {cfg.q})"
        )

    res = residual_field(field, smoother)
    pilot_n = build_sqrt(n, cfg.pilot, cfg.kernel, cfg.sqrt_mode)
    pilot_m = build_sqrt(m, cfg.pilot, cfg.kernel, cfg.sqrt_mode)
    pilot_shape = wild_noise_shape(pilot_n, pilot_m)
    pilot_draws = (stream(cfg.seed, PILOT, b).standard_normal(pilot_shape) for b in range(cfg.reps))
    sigma2 = _bootstrap_variance(res, pilot_n, pilot_m, pilot_draws)
    logger.info(f"Pilot bootstrap variance {sigma2:.6g} with B={cfg.pilot} over {cfg.reps} replicates")

    candidates = cfg.candidates
    roots = {b: (build_sqrt(n0, b, cfg.kernel, cfg.sqrt_mode), build_sqrt(m0, b, cfg.kernel, cfg.sqrt_mode))
             for b in candidates}

    block_shape = wild_noise_shape(*roots[candidates[0]])

    def block_variances(iteration):
        rng = stream(cfg.seed, BLOCK, iteration)
        u = int(rng.integers(1, n - n0 + 2))
        v = int(rng.integers(1, m - m0 + 2))
        block = Field(field.values[u - 1:u - 1 + n0, v - 1:v - 1 + m0])
        block_res = residual_field(block, smoother)
        draws = [stream(cfg.seed, BLOCK_REPLICATE, iteration, b).standard_normal(block_shape) for b in range(cfg.reps)]
        return (u, v), [_bootstrap_variance(block_res, *roots[b], draws) for b in candidates]

    with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as executor:
        blocks = list(executor.map(block_variances, range(cfg.iterations)))

    tau2 = np.array([variances for _, variances in blocks])
    losses = np.sum((tau2 - sigma2) ** 2, axis=0)
    b_best = candidates[int(np.argmin(losses))]
    logger.info(f"Block subsampling selected B={b_best} over {cfg.iterations} blocks of {n0}x{m0}")
    return VbSelection(
        b_best=b_best,
        losses={b: float(loss) for b, loss in zip(candidates, losses)},
        sigma2=sigma2,
        corners=tuple(corner for corner, _ in blocks),
    )
