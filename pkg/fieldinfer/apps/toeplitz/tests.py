"""
Tests for toeplitz app.
"""
import math

import numpy as np
from django.test import SimpleTestCase, override_settings

from apps.grid.exceptions import ConfigError, ShapeError, SizeError
from apps.kernels.services import BARTLETT, GAUSSIAN
from apps.toeplitz.services import (
    DenseSqrtOperator,
    FftSqrtOperator,
    Side,
    SqrtMode,
    apply_sqrt_columns,
    build_row,
    build_sqrt,
    embedding_length,
    sqrt_dense,
    sqrt_fft,
)


def unit_vectors(rng, n, count, support=None):
    """Random unit vectors, optionally supported on a slice."""
    vectors = np.zeros((count, n))
    lo, hi = support or (0, n)
    vectors[:, lo:hi] = rng.standard_normal((count, hi - lo))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


class ToeplitzRowTest(SimpleTestCase):
    """Test kernel row construction."""

    def test_gaussian_row(self):
        """Test the n=3, B=1 Gaussian row."""
        row = build_row(3, 1.0, GAUSSIAN)
        np.testing.assert_allclose(row.first_row, [1.0, math.exp(-0.5), math.exp(-2.0)], rtol=1e-15)

    def test_row_starts_at_one(self):
        """Test row[0] = 1 for several sizes and bandwidths."""
        for n in (1, 7, 64):
            for bandwidth in (0.3, 2.0, 11.0):
                self.assertEqual(build_row(n, bandwidth, GAUSSIAN).first_row[0], 1.0)

    def test_huge_bandwidth(self):
        """Test a huge bandwidth gives an all-ones row."""
        np.testing.assert_allclose(build_row(5, 1e12, GAUSSIAN).first_row, np.ones(5), atol=1e-15)

    def test_rejects_bad_arguments(self):
        """Test argument validation."""
        with self.assertRaises(ConfigError):
            build_row(0, 1.0, GAUSSIAN)
        with self.assertRaises(ConfigError):
            build_row(4, 0.0, GAUSSIAN)


class DenseSqrtTest(SimpleTestCase):
    """Test the dense square root."""

    def test_order_one(self):
        """Test n=1 gives Q = [1]."""
        op = sqrt_dense(build_row(1, 3.0, GAUSSIAN))
        np.testing.assert_allclose(op.matrix(), [[1.0]])

    def test_two_by_two_closed_form(self):
        """Test the 2x2 root against its closed form."""
        a = math.exp(-0.5)
        op = sqrt_dense(build_row(2, 1.0, GAUSSIAN))
        plus, minus = math.sqrt(1 + a), math.sqrt(1 - a)
        expected = 0.5 * np.array([[plus + minus, plus - minus], [plus - minus, plus + minus]])
        np.testing.assert_allclose(op.matrix(), expected, atol=1e-12)
        np.testing.assert_allclose(op.matrix() @ op.matrix(), [[1, a], [a, 1]], atol=1e-12)

    def test_compact_row_gives_identity(self):
        """Test a row equal to e1 gives the identity."""
        row = build_row(6, 0.5, BARTLETT)
        np.testing.assert_array_equal(row.first_row, np.eye(6)[0])
        np.testing.assert_allclose(sqrt_dense(row).matrix(), np.eye(6), atol=1e-12)

    def test_square_reproduces_toeplitz(self):
        """Test Q symmetric and Q @ Q = T across sizes and bandwidths."""
        for n in (32, 64, 128):
            for bandwidth in (2.0, 5.0, 10.0):
                row = build_row(n, bandwidth, GAUSSIAN)
                q = sqrt_dense(row).matrix()
                np.testing.assert_array_equal(q, q.T)
                self.assertLessEqual(np.max(np.abs(q @ q - row.matrix())), 1e-8)

    @override_settings(FIELDINFER_DENSE_SIZE_CAP=10)
    def test_size_cap(self):
        """Test the dense size cap."""
        with self.assertRaises(SizeError):
            sqrt_dense(build_row(11, 2.0, GAUSSIAN))


class FftSqrtTest(SimpleTestCase):
    """Test the circulant-embedding square root."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(2024)

    def test_embedding_length(self):
        """Test the embedding is the next power of two >= 2n."""
        self.assertEqual(embedding_length(64), 128)
        self.assertEqual(embedding_length(65), 256)
        self.assertEqual(sqrt_fft(build_row(100, 3.0, GAUSSIAN)).embedding_length, 256)

    def test_identity_row(self):
        """Test an e1 row gives the identity operator."""
        op = sqrt_fft(build_row(16, 0.5, BARTLETT))
        v = self.rng.standard_normal(16)
        np.testing.assert_allclose(op.apply(v), v, atol=1e-12)

    def test_linearity(self):
        """Test apply is linear."""
        op = sqrt_fft(build_row(64, 5.0, GAUSSIAN))
        u, v = self.rng.standard_normal((2, 64))
        alpha, beta = 0.7, -2.3
        np.testing.assert_allclose(
            op.apply(alpha * u + beta * v), alpha * op.apply(u) + beta * op.apply(v), atol=1e-12
        )

    def test_twice_reproduces_toeplitz_in_interior(self):
        """Test applying the root twice equals T v away from the edges."""
        n = 128
        for bandwidth in (2.0, 5.0):
            margin = int(6 * bandwidth)
            row = build_row(n, bandwidth, GAUSSIAN)
            op = sqrt_fft(row)
            for v in unit_vectors(self.rng, n, 20, support=(margin, n - margin)):
                error = np.max(np.abs(op.apply(op.apply(v)) - row.matrix() @ v))
                self.assertLessEqual(error, 1e-6)

    def test_interior_covariance_matches_dense(self):
        """Test Q Q^T agrees with T (and the dense root) on interior rows."""
        n = 128
        for bandwidth in (2.0, 5.0, 10.0):
            margin = int(6 * bandwidth)
            row = build_row(n, bandwidth, GAUSSIAN)
            fft_q = sqrt_fft(row).matrix()
            dense_q = sqrt_dense(row).matrix()
            inner = slice(margin, n - margin)
            fft_cov = (fft_q @ fft_q.T)[inner, inner]
            dense_cov = (dense_q @ dense_q.T)[inner, inner]
            self.assertLessEqual(np.max(np.abs(fft_cov - row.matrix()[inner, inner])), 1e-6)
            self.assertLessEqual(np.max(np.abs(fft_cov - dense_cov)), 1e-6)

    def test_fft_root_is_symmetric(self):
        """Test the materialized FFT root is symmetric."""
        q = sqrt_fft(build_row(40, 3.0, GAUSSIAN)).matrix()
        np.testing.assert_allclose(q, q.T, atol=1e-13)

    def test_needs_two_rows(self):
        """Test the order precondition."""
        with self.assertRaises(ConfigError):
            sqrt_fft(build_row(1, 1.0, GAUSSIAN))


class SqrtSamplingTest(SimpleTestCase):
    """Test correlated rows drawn through a root."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(77)

    def test_fft_sampling_covariance_is_exact(self):
        """Test S S^T reproduces the Toeplitz matrix up to the edges."""
        for n, bandwidth in ((64, 2.0), (64, 5.0), (128, 10.0)):
            row = build_row(n, bandwidth, GAUSSIAN)
            op = sqrt_fft(row)
            self.assertEqual(op.clipped, 0)
            self.assertEqual(op.noise_size, op.embedding_length)
            s = op.sampling_matrix()
            self.assertEqual(s.shape, (n, op.embedding_length))
            self.assertLessEqual(np.max(np.abs(s @ s.T - row.matrix())), 1e-10)

    def test_dense_sampling_is_apply(self):
        """Test a dense root samples from n rows with Q itself."""
        op = sqrt_dense(build_row(12, 3.0, GAUSSIAN))
        noise = self.rng.standard_normal((12, 4))
        self.assertEqual(op.noise_size, 12)
        np.testing.assert_array_equal(op.sample(noise), op.apply(noise))

    def test_adjoint_is_transpose(self):
        """Test adjoint multiplies by the transposed sampling matrix."""
        op = sqrt_fft(build_row(20, 3.0, GAUSSIAN))
        mat = self.rng.standard_normal((20, 3))
        np.testing.assert_allclose(op.adjoint(mat), op.sampling_matrix().T @ mat, atol=1e-12)

    def test_noise_rows_checked(self):
        """Test sample rejects noise of the wrong height."""
        with self.assertRaises(ShapeError):
            sqrt_fft(build_row(20, 3.0, GAUSSIAN)).sample(np.ones((20, 2)))
        with self.assertRaises(ShapeError):
            sqrt_dense(build_row(20, 3.0, GAUSSIAN)).sample(np.ones((21, 2)))


class BuildSqrtTest(SimpleTestCase):
    """Test operator selection."""

    def setUp(self):
        """Set up test data."""
        build_sqrt.cache_clear()

    def tearDown(self):
        build_sqrt.cache_clear()

    @override_settings(FIELDINFER_DENSE_DEFAULT_MAX=16)
    def test_auto_mode(self):
        """Test auto picks dense for small and FFT for large orders."""
        self.assertIsInstance(build_sqrt(16, 2.0, GAUSSIAN), DenseSqrtOperator)
        self.assertIsInstance(build_sqrt(17, 2.0, GAUSSIAN), FftSqrtOperator)

    def test_explicit_modes(self):
        """Test explicit modes and the n=1 fallback."""
        self.assertIsInstance(build_sqrt(30, 2.0, GAUSSIAN, SqrtMode.FFT), FftSqrtOperator)
        self.assertIsInstance(build_sqrt(30, 2.0, GAUSSIAN, 'dense'), DenseSqrtOperator)
        self.assertIsInstance(build_sqrt(1, 2.0, GAUSSIAN, SqrtMode.FFT), DenseSqrtOperator)

    def test_memoized(self):
        """Test repeated builds return the same operator."""
        self.assertIs(build_sqrt(12, 2.0, GAUSSIAN), build_sqrt(12, 2.0, GAUSSIAN))


class ApplySqrtColumnsTest(SimpleTestCase):
    """Test one- and two-sided multiplication."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(9)

    def test_identity_operator(self):
        """Test the identity root leaves matrices unchanged."""
        op = sqrt_dense(build_row(5, 0.5, BARTLETT))
        mat = self.rng.standard_normal((5, 5))
        np.testing.assert_allclose(apply_sqrt_columns(op, mat, Side.LEFT), mat, atol=1e-12)
        np.testing.assert_allclose(apply_sqrt_columns(op, mat, Side.RIGHT), mat, atol=1e-12)

    def test_left_product(self):
        """Test Left equals the explicit product."""
        op = sqrt_dense(build_row(4, 2.0, GAUSSIAN))
        mat = self.rng.standard_normal((4, 4))
        np.testing.assert_allclose(apply_sqrt_columns(op, mat, Side.LEFT), op.matrix() @ mat, atol=1e-13)

    def test_two_sided_product(self):
        """Test Left then Right equals Q_r @ mat @ Q_c."""
        rows, cols = sqrt_dense(build_row(8, 2.0, GAUSSIAN)), sqrt_dense(build_row(6, 3.0, GAUSSIAN))
        mat = self.rng.standard_normal((8, 6))
        result = apply_sqrt_columns(cols, apply_sqrt_columns(rows, mat, Side.LEFT), Side.RIGHT)
        np.testing.assert_allclose(result, rows.matrix() @ mat @ cols.matrix(), atol=1e-12)

    def test_shape_mismatch(self):
        """Test mismatched dimensions raise ShapeError."""
        op = sqrt_dense(build_row(4, 2.0, GAUSSIAN))
        with self.assertRaises(ShapeError):
            apply_sqrt_columns(op, np.ones((5, 4)), Side.LEFT)
        with self.assertRaises(ShapeError):
            apply_sqrt_columns(op, np.ones((4, 5)), Side.RIGHT)
