"""
Symmetric square roots of kernel-generated Toeplitz matrices.

The row-wise matrix K_r = {K((i1 - i2) / B)} is symmetric Toeplitz and
positive semi-definite for a valid variance kernel, so it has a symmetric
root Q with Q @ Q = K_r. Two constructions are provided:

* dense: eigendecomposition of the full matrix, exact up to clipping;
* fft: circulant embedding of length L >= 2n, root of the clipped
  spectrum, applied with real FFTs and truncated back to n rows.

Multiplier noise for an FFT root is drawn on the full embedding
(noise_size = L rows) and truncated after the root is applied, so the
sampled rows have covariance exactly K_r whenever no spectral value was
clipped.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.db import models
from scipy import fft as sp_fft
from scipy import linalg

from apps.grid.exceptions import ConfigError, ShapeError, SizeError

logger = logging.getLogger(__name__)

CLIP_WARNING_TOLERANCE = 1e-10


class SqrtMode(models.TextChoices):
    """Square-root construction choices."""
    AUTO = 'auto', 'Dense up to the configured size, FFT above'
    DENSE = 'dense', 'Dense eigendecomposition'
    FFT = 'fft', 'Circulant embedding with FFT'


class Side(models.TextChoices):
    """Which side of a matrix the root multiplies."""
    LEFT = 'left', 'Q @ mat'
    RIGHT = 'right', 'mat @ Q'


@dataclass(frozen=True, eq=False)
class ToeplitzKernelRow:
    """
    First row of K_r.

    Attributes:
        size: matrix order n
        bandwidth: variance bandwidth B
        kernel_name: name of the generating kernel
        first_row: entries K(t / B) for t = 0..n-1
    """
    size: int
    bandwidth: float
    kernel_name: str
    first_row: np.ndarray

    def matrix(self):
        """Materialize the full symmetric Toeplitz matrix."""
        return linalg.toeplitz(self.first_row)


def build_row(n, bandwidth, k):
    """
    Tabulate the kernel row K(t / B), t = 0..n-1.

    Args:
        n: matrix order (>= 1)
        bandwidth: variance bandwidth B (> 0)
        k: VarianceKernel

    Returns:
        ToeplitzKernelRow
    """
    if n < 1:
        raise ConfigError(f"Toeplitz order must be >= 1, got {n}")
    if not bandwidth > 0:
        raise ConfigError(f"variance bandwidth must be positive, got {bandwidth}")
    first_row = np.asarray(k(np.arange(n, dtype=np.float64) / bandwidth), dtype=np.float64)
    first_row.setflags(write=False)
    return ToeplitzKernelRow(size=n, bandwidth=float(bandwidth), kernel_name=k.name, first_row=first_row)


class SqrtOperator:
    """
    Implicit symmetric square root of a Toeplitz kernel matrix.

    Attributes:
        size: matrix order
        mode: SqrtMode.DENSE or SqrtMode.FFT
        bandwidth: variance bandwidth of the generating row
        kernel_name: variance kernel name
        clipped: number of eigenvalues (or spectral values) clipped to 0
    """
    mode = None

    def __init__(self, row, clipped=0):
        self.size = row.size
        self.bandwidth = row.bandwidth
        self.kernel_name = row.kernel_name
        self.clipped = clipped

    def apply(self, mat):
        """Return Q @ mat for a vector or an (n, c) matrix."""
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape[0] != self.size:
            raise ShapeError(f"root of order {self.size} cannot multiply {mat.shape[0]} rows")
        return self._apply(mat)

    def _apply(self, mat):
        raise NotImplementedError

    @property
    def noise_size(self):
        """Rows of standard normal noise consumed by sample()."""
        return self.size

    def sample(self, noise):
        """
        Correlated rows from noise_size rows of standard normals.

        The result has self.size rows with covariance K_r down each column.
        """
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape[0] != self.noise_size:
            raise ShapeError(f"sampling root of order {self.size} needs {self.noise_size} noise rows, got {noise.shape[0]}")
        return self._apply(noise)

    def adjoint(self, mat):
        """
        S.T @ mat for the sampling matrix S, with noise_size rows.

        Equals apply() for a dense root.
        """
        mat = np.asarray(mat, dtype=np.float64)
        if mat.shape[0] != self.size:
            raise ShapeError(f"root of order {self.size} cannot multiply {mat.shape[0]} rows")
        return self._adjoint(mat)

    def _adjoint(self, mat):
        return self._apply(mat)

    def sampling_matrix(self):
        """size x noise_size matrix S; S @ S.T is the covariance of sampled rows."""
        return self.sample(np.eye(self.noise_size))

    def matrix(self):
        """Materialize Q."""
        return self.apply(np.eye(self.size))

    def __repr__(self):
        return f"<{type(self).__name__} size={self.size} B={self.bandwidth} kernel={self.kernel_name}>"


class DenseSqrtOperator(SqrtOperator):
    """Root stored as an explicit symmetric matrix."""
    mode = SqrtMode.DENSE

    def __init__(self, row, q, clipped=0):
        super().__init__(row, clipped)
        q.setflags(write=False)
        self.q = q

    def _apply(self, mat):
        return self.q @ mat

    def matrix(self):
        return self.q


class FftSqrtOperator(SqrtOperator):
    """Root stored as the spectral root of a circulant embedding."""
    mode = SqrtMode.FFT

    def __init__(self, row, spectral_root, clipped=0):
        super().__init__(row, clipped)
        spectral_root.setflags(write=False)
        self.spectral_root = spectral_root
        self.embedding_length = 2 * (spectral_root.size - 1)

    def _circulant(self, mat):
        root = self.spectral_root if mat.ndim == 1 else self.spectral_root[:, None]
        spectrum = sp_fft.rfft(mat, n=self.embedding_length, axis=0)
        return sp_fft.irfft(spectrum * root, n=self.embedding_length, axis=0)

    def _apply(self, mat):
        return self._circulant(mat)[:self.size]

    def _adjoint(self, mat):
        # zero-padded to L rows by rfft
        return self._circulant(mat)

    @property
    def noise_size(self):
        return self.embedding_length


def sqrt_dense(row):
    """
    Exact symmetric root from the eigendecomposition of the full matrix.

    Negative eigenvalues are clipped to 0 before taking the root.

    Raises:
        SizeError: order above FIELDINFER_DENSE_SIZE_CAP
    """
    cap = getattr(settings, 'FIELDINFER_DENSE_SIZE_CAP', 2048)
    if row.size > cap:
        raise SizeError(f"dense square root of order {row.size} exceeds the cap of {cap}")

    eigenvalues, vectors = linalg.eigh(row.matrix())
    negative = eigenvalues < 0
    clipped = int(np.count_nonzero(eigenvalues < -CLIP_WARNING_TOLERANCE))
    if clipped:
        logger.warning(
            f"Clipped {clipped} negative eigenvalue(s) (min {eigenvalues.min():.3e}) "
            f"of the {row.kernel_name} Toeplitz matrix, n={row.size}, B={row.bandwidth}"
        )
    roots = np.sqrt(np.where(negative, 0.0, eigenvalues))
    q = (vectors * roots) @ vectors.T
    q = 0.5 * (q + q.T)
    return DenseSqrtOperator(row, q, clipped=clipped)


def embedding_length(n):
    """Smallest power of two >= 2n."""
    return 1 << int(np.ceil(np.log2(2 * n)))


def sqrt_fft(row):
    """
    Circulant-embedding root applied with FFTs.

    The first row is wrapped symmetrically into a length-L circulant
    (L the next power of two >= 2n, zeros in the middle), its spectrum
    clipped at 0 and square-rooted.
    """
    n = row.size
    if n < 2:
        raise ConfigError("FFT square root needs order >= 2")
    length = embedding_length(n)
    embedded = np.zeros(length)
    embedded[:n] = row.first_row
    embedded[length - n + 1:] = row.first_row[1:][::-1]

    spectrum = sp_fft.rfft(embedded).real
    clipped = int(np.count_nonzero(spectrum < -CLIP_WARNING_TOLERANCE))
    if clipped:
        logger.warning(
            f"Clipped {clipped} negative spectral value(s) (min {spectrum.min():.3e}) "
            f"of the {row.kernel_name} circulant embedding, n={n}, B={row.bandwidth}"
        )
    return FftSqrtOperator(row, np.sqrt(np.clip(spectrum, 0.0, None)), clipped=clipped)


@functools.lru_cache(maxsize=64)
def build_sqrt(n, bandwidth, k, mode=SqrtMode.AUTO):
    """
    Build (and memoize) the root of the order-n matrix for (B, K).

    Args:
        n: matrix order
        bandwidth: variance bandwidth
        k: VarianceKernel
        mode: SqrtMode; AUTO picks dense up to FIELDINFER_DENSE_DEFAULT_MAX

    Returns:
        SqrtOperator
    """
    mode = SqrtMode(mode)
    row = build_row(n, bandwidth, k)
    if mode == SqrtMode.AUTO:
        dense_max = getattr(settings, 'FIELDINFER_DENSE_DEFAULT_MAX', 256)
        mode = SqrtMode.DENSE if n <= dense_max else SqrtMode.FFT
    if mode == SqrtMode.FFT and n >= 2:
        return sqrt_fft(row)
    return sqrt_dense(row)


def apply_sqrt_columns(op, mat, side=Side.LEFT):
    """
    Multiply a matrix by a root from either side.

    Args:
        op: SqrtOperator
        mat: 2-D array
        side: Side.LEFT gives Q @ mat, Side.RIGHT gives mat @ Q

    Raises:
        ShapeError: op.size does not match the multiplied dimension
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {mat.shape}")
    if Side(side) == Side.LEFT:
        return op.apply(mat)
    if mat.shape[1] != op.size:
        raise ShapeError(f"root of order {op.size} cannot multiply {mat.shape[1]} columns")
    return op.apply(mat.T).T
