"""
Tests for smoother app.
"""
import numpy as np
from django.test import SimpleTestCase

from apps.grid.exceptions import BandwidthTooLargeError, BoundaryError, ConfigError
from apps.grid.services import Field, Position, make_position_grid
from apps.kernels.services import QUARTIC, SMOOTHING_KERNELS, TRIANGULAR, UNIFORM
from apps.smoother.services import (
    ResidualField,
    SmootherConfig,
    estimate_positions,
    nw_estimate,
    nw_surface,
    residual_field,
    smoothing_constants,
    window_weights,
)


def lattice(n, m, func):
    """Evaluate func(x, y) on the lattice (i/n, j/m), i, j 1-based."""
    x = np.arange(1, n + 1)[:, None] / n
    y = np.arange(1, m + 1)[None, :] / m
    return func(x, y) + np.zeros((n, m))


def anchor(p, q):
    return Position(0.0, 0.0, p, q)


class NwEstimateTest(SimpleTestCase):
    """Test single-position estimates."""

    def test_constant_field(self):
        """Test a constant field is reproduced."""
        field = Field(np.full((15, 15), 7.0))
        for kernel in SMOOTHING_KERNELS.values():
            self.assertAlmostEqual(nw_estimate(field, anchor(8, 8), SmootherConfig(3, kernel)), 7.0, places=12)

    def test_linear_in_rows(self):
        """Test X = i is estimated exactly at the anchor."""
        field = Field(np.repeat(np.arange(1, 21, dtype=float)[:, None], 20, axis=1))
        for p in (5, 10, 16):
            self.assertAlmostEqual(nw_estimate(field, anchor(p, 10), SmootherConfig(4, QUARTIC)), p, places=10)

    def test_uniform_three_by_three(self):
        """Test K=1 uniform gives the 3x3 arithmetic mean."""
        values = np.arange(1, 26, dtype=float).reshape(5, 5) ** 2
        field = Field(values)
        expected = values[1:4, 2:5].mean()
        self.assertAlmostEqual(nw_estimate(field, anchor(3, 4), SmootherConfig(1, UNIFORM)), expected, places=12)

    def test_window_outside_lattice(self):
        """Test a window leaving the lattice raises BoundaryError."""
        field = Field(np.zeros((10, 10)))
        with self.assertRaises(BoundaryError):
            nw_estimate(field, anchor(2, 5), SmootherConfig(2))
        with self.assertRaises(BoundaryError):
            nw_estimate(field, anchor(5, 9), SmootherConfig(2))

    def test_rejects_bad_bandwidth(self):
        """Test the bandwidth must be a positive integer."""
        with self.assertRaises(ConfigError):
            SmootherConfig(0)
        with self.assertRaises(ConfigError):
            SmootherConfig(2.5)


class NwSurfaceTest(SimpleTestCase):
    """Test full-surface estimates and residuals."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(17)

    def test_surface_matches_pointwise(self):
        """Test every surface cell against nw_estimate on a 20x20 field."""
        field = Field(self.rng.standard_normal((20, 20)))
        for kernel in (QUARTIC, TRIANGULAR):
            cfg = SmootherConfig(3, kernel)
            surface = nw_surface(field, cfg)
            self.assertEqual(surface.values.shape, (14, 14))
            for i in range(4, 18):
                for j in range(4, 18):
                    self.assertAlmostEqual(surface.at(i, j), nw_estimate(field, anchor(i, j), cfg), places=12)

    def test_constant_surface(self):
        """Test a constant field gives a constant surface."""
        surface = nw_surface(Field(np.full((12, 9), -2.5)), SmootherConfig(2))
        np.testing.assert_allclose(surface.values, -2.5, rtol=1e-14)

    def test_too_small_field(self):
        """Test a field narrower than the window is rejected."""
        with self.assertRaises(BandwidthTooLargeError):
            nw_surface(Field(np.zeros((6, 30))), SmootherConfig(3))

    def test_elliptical_bias(self):
        """Test the smoothing bias on the elliptical mean is small."""
        def mu(x, y):
            return 1.0 - (1.5 * (x - 0.5) ** 2 + 6.0 * (y - 0.5) ** 2)

        truth = lattice(200, 200, mu)
        surface = nw_surface(Field(truth), SmootherConfig(10))
        self.assertLessEqual(np.max(np.abs(surface.values - truth[10:190, 10:190])), 0.01)

    def test_affine_exactness(self):
        """Test affine mean fields are reproduced for every kernel."""
        def mu(x, y):
            return 0.3 - 1.7 * x + 2.2 * y

        truth = lattice(44, 40, mu)
        for kernel in SMOOTHING_KERNELS.values():
            for k in (1, 5, 10):
                surface = nw_surface(Field(truth), SmootherConfig(k, kernel))
                np.testing.assert_allclose(surface.values, truth[k:44 - k, k:40 - k], atol=1e-10, rtol=0)

    def test_shift_and_scale_equivariance(self):
        """Test estimates shift and scale with the field."""
        values = self.rng.standard_normal((25, 25))
        cfg = SmootherConfig(4)
        base = nw_surface(Field(values), cfg).values
        np.testing.assert_allclose(nw_surface(Field(values + 3.0), cfg).values, base + 3.0, atol=1e-12)
        np.testing.assert_allclose(nw_surface(Field(values * -2.0), cfg).values, base * -2.0, atol=1e-12)
        np.testing.assert_allclose(
            residual_field(Field(values * -2.0), cfg).values,
            residual_field(Field(values), cfg).values * -2.0,
            atol=1e-12,
        )

    def test_zero_residuals_for_constant(self):
        """Test residuals of a noise-free constant field vanish."""
        res = residual_field(Field(np.full((20, 20), 4.0)), SmootherConfig(3))
        self.assertLessEqual(np.max(np.abs(res.values)), 1e-12)

    def test_residuals_reconstruct_field(self):
        """Test residual plus surface equals X on the interior, zero outside."""
        values = self.rng.standard_normal((18, 22))
        cfg = SmootherConfig(3)
        res = residual_field(Field(values), cfg)
        surface = nw_surface(Field(values), cfg)
        np.testing.assert_allclose(res.values[3:15, 3:19] + surface.values, values[3:15, 3:19], atol=1e-13)
        self.assertTrue(res.mask[3:15, 3:19].all())
        self.assertEqual(int(res.mask.sum()), 12 * 16)
        self.assertTrue(np.all(res.values[~res.mask] == 0.0))

    def test_residual_variance_iid_noise(self):
        """Test residual variance for i.i.d. standard normal noise."""
        res = residual_field(Field(self.rng.standard_normal((200, 200))), SmootherConfig(10))
        variance = float(np.var(res.interior()))
        self.assertGreaterEqual(variance, 0.85)
        self.assertLessEqual(variance, 1.05)

    def test_noise_surrogate(self):
        """Test the raw-noise residual surrogate has a full mask."""
        res = ResidualField.from_noise(np.ones((4, 5)))
        self.assertTrue(res.mask.all())
        self.assertEqual(res.bandwidth, 0)


class WindowWeightsTest(SimpleTestCase):
    """Test normalized window weights and constants."""

    def test_unit_norm(self):
        """Test the squared weights sum to one."""
        for kernel in SMOOTHING_KERNELS.values():
            for k in (1, 4, 10):
                weights = window_weights(anchor(30, 30), SmootherConfig(k, kernel), 60, 60)
                self.assertAlmostEqual(float(np.sum(weights.block ** 2)), 1.0, places=12)

    def test_center_weight(self):
        """Test the center weight is 1 / B_nm."""
        cfg = SmootherConfig(5)
        weights = window_weights(anchor(20, 20), cfg, 40, 40)
        _, b_nm = smoothing_constants(cfg)
        self.assertEqual(weights.block[5, 5], 1.0 / b_nm)

    def test_uniform_k1(self):
        """Test K=1 uniform weights are all 1/3."""
        weights = window_weights(anchor(4, 4), SmootherConfig(1, UNIFORM), 8, 8)
        items = list(weights.items())
        self.assertEqual(len(items), 9)
        for i, j, c in items:
            self.assertAlmostEqual(c, 1.0 / 3.0, places=15)
        self.assertEqual({(i, j) for i, j, _ in items}, {(i, j) for i in (3, 4, 5) for j in (3, 4, 5)})
        self.assertAlmostEqual(float(weights.dense().sum()), 3.0, places=14)

    def test_constants(self):
        """Test T and B for small windows and the ordering T >= B >= 1."""
        self.assertEqual(smoothing_constants(SmootherConfig(1, UNIFORM)), (9.0, 3.0))
        self.assertEqual(smoothing_constants(SmootherConfig(1, QUARTIC)), (1.0, 1.0))
        for kernel in SMOOTHING_KERNELS.values():
            for k in range(1, 51):
                t_nm, b_nm = smoothing_constants(SmootherConfig(k, kernel))
                self.assertGreaterEqual(t_nm, b_nm)
                self.assertGreaterEqual(b_nm, 1.0)

    def test_weighted_sum_identity(self):
        """Test (T/B)(mu_hat - c0) = sum c (X - c0)."""
        rng = np.random.default_rng(4)
        values = rng.standard_normal((30, 30))
        cfg = SmootherConfig(6)
        pos = anchor(15, 17)
        t_nm, b_nm = smoothing_constants(cfg)
        weights = window_weights(pos, cfg, 30, 30)
        rows, cols = weights.slices
        for c0 in (0.0, -1.3, 5.0):
            lhs = t_nm / b_nm * (nw_estimate(Field(values), pos, cfg) - c0)
            rhs = float(np.sum(weights.block * (values[rows, cols] - c0)))
            self.assertAlmostEqual(lhs, rhs, places=10)

    def test_estimate_set(self):
        """Test estimates on a position grid."""
        field = Field(np.full((60, 60), 1.5))
        cfg = SmootherConfig(5)
        grid = make_position_grid(60, 60, 5, 4)
        result = estimate_positions(field, grid, cfg)
        self.assertEqual(result.estimates.shape, (16,))
        np.testing.assert_allclose(result.estimates, 1.5, rtol=1e-14)
        self.assertEqual((result.t_nm, result.b_nm), smoothing_constants(cfg))
