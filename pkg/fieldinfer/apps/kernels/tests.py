"""
Tests for kernels app.
"""
import math

import numpy as np
from django.test import SimpleTestCase

from apps.grid.exceptions import ConfigError
from apps.kernels.services import (
    BARTLETT,
    GAUSSIAN,
    PARZEN,
    QUARTIC,
    SMOOTHING_KERNELS,
    VARIANCE_KERNELS,
    SmoothingKernel,
    VarianceKernel,
    eval_smoothing,
    eval_variance,
    get_smoothing_kernel,
    get_variance_kernel,
    validate_smoothing_kernel,
    validate_variance_kernel,
)


class SmoothingKernelTest(SimpleTestCase):
    """Test smoothing kernel evaluation."""

    def test_quartic_values(self):
        """Test quartic kernel at the center, outside and symmetric points."""
        self.assertEqual(eval_smoothing(QUARTIC, 0.0), 1.0)
        self.assertEqual(eval_smoothing(QUARTIC, 0.5), eval_smoothing(QUARTIC, -0.5))
        self.assertAlmostEqual(eval_smoothing(QUARTIC, 0.5), 0.5625)

    def test_zero_outside_support(self):
        """Test every built-in kernel vanishes beyond |x| = 1."""
        for kernel in SMOOTHING_KERNELS.values():
            self.assertEqual(eval_smoothing(kernel, 1.5), 0.0)
            self.assertEqual(eval_smoothing(kernel, -2.0), 0.0)

    def test_shape_properties_random_points(self):
        """Test symmetry, range and monotonicity on random points."""
        x = np.random.default_rng(3).uniform(-1.0, 1.0, 1000)
        for kernel in SMOOTHING_KERNELS.values():
            values = kernel(x)
            np.testing.assert_array_equal(values, kernel(-x))
            self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))
            a = np.sort(np.abs(x))
            self.assertTrue(np.all(np.diff(kernel(a)) <= 0.0))
            self.assertTrue(validate_smoothing_kernel(kernel).passed)

    def test_tabulated_kernel(self):
        """Test a valid tabulated kernel interpolates its nodes."""
        kernel = SmoothingKernel.tabulated('steps', [0.0, 0.5, 1.0], [1.0, 0.5, 0.0])
        self.assertAlmostEqual(kernel(0.25), 0.75)
        self.assertAlmostEqual(kernel(-0.25), 0.75)
        self.assertEqual(kernel(1.2), 0.0)

    def test_tabulated_kernel_rejected(self):
        """Test invalid tabulated kernels raise ConfigError."""
        with self.assertRaises(ConfigError):
            SmoothingKernel.tabulated('bad', [0.0, 0.5, 1.0], [1.0, 0.2, 0.6])
        with self.assertRaises(ConfigError):
            SmoothingKernel.tabulated('bad', [0.0, 1.0], [0.5, 0.0])

    def test_unknown_kernel_name(self):
        """Test lookup of an unknown kernel."""
        with self.assertRaises(ConfigError):
            get_smoothing_kernel('epanechnikov-9')
        self.assertIs(get_smoothing_kernel('quartic'), QUARTIC)


class VarianceKernelTest(SimpleTestCase):
    """Test variance kernels and their validity report."""

    def test_gaussian_values(self):
        """Test Gaussian kernel values."""
        self.assertEqual(eval_variance(GAUSSIAN, 0.0), 1.0)
        self.assertAlmostEqual(eval_variance(GAUSSIAN, 1.0), 0.60653065971, places=11)
        self.assertEqual(eval_variance(GAUSSIAN, -2.0), eval_variance(GAUSSIAN, 2.0))

    def test_builtin_shape_properties(self):
        """Test symmetry, range and monotonicity for built-in kernels."""
        x = np.random.default_rng(5).uniform(-30.0, 30.0, 1000)
        for kernel in VARIANCE_KERNELS.values():
            values = kernel(x)
            np.testing.assert_array_equal(values, kernel(-x))
            self.assertTrue(np.all((values >= 0.0) & (values <= 1.0)))
            self.assertTrue(np.all(np.diff(kernel(np.sort(np.abs(x)))) <= 0.0))
        self.assertIs(get_variance_kernel('parzen'), PARZEN)

    def test_gaussian_passes_for_wide_extents(self):
        """Test Gaussian validation across grids with extent >= 10."""
        for grid_points in (256, 1024, 4096):
            for extent in (10.0, 15.0, 40.0):
                report = validate_variance_kernel(GAUSSIAN, grid_points, extent)
                self.assertTrue(report.passed, report.messages)
                self.assertTrue(report.all_passed, report.messages)

    def test_boxcar_fails(self):
        """Test the boxcar kernel fails the Fourier check."""
        boxcar = VarianceKernel.custom('boxcar', lambda x: (np.abs(x) <= 1.0).astype(float))
        report = validate_variance_kernel(boxcar, 1024, 8.0)
        self.assertFalse(report.passed)
        self.assertLess(report.min_dft, -1e-8)

    def test_triangular_passes(self):
        """Test the triangular kernel passes the Fourier check."""
        triangular = VarianceKernel.custom('triangle', lambda x: np.clip(1.0 - np.abs(x), 0.0, None))
        report = validate_variance_kernel(triangular, 1024, 8.0)
        self.assertTrue(report.passed, report.messages)

    def test_bartlett_and_parzen_pass(self):
        """Test the lag-window kernels pass validation."""
        for kernel in (BARTLETT, PARZEN):
            self.assertTrue(validate_variance_kernel(kernel).all_passed)

    def test_gaussian_integrals(self):
        """Test the reported integrals of the Gaussian kernel."""
        report = validate_variance_kernel(GAUSSIAN, 4096, 20.0)
        self.assertAlmostEqual(report.integrals['k_squared'], math.sqrt(math.pi) / 2, places=4)
        self.assertAlmostEqual(report.integrals['x_times_k'], 1.0, places=4)

    def test_bad_arguments(self):
        """Test validation argument checks."""
        with self.assertRaises(ConfigError):
            validate_variance_kernel(GAUSSIAN, 100, 10.0)
        with self.assertRaises(ConfigError):
            validate_variance_kernel(GAUSSIAN, 512, 0.0)
