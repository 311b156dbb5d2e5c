"""
Tests for hac app.
"""
import itertools

import numpy as np
from django.test import SimpleTestCase
from scipy import signal

from apps.grid.exceptions import BoundaryError, ConfigError
from apps.grid.services import Field, Position
from apps.hac.services import BootstrapMode, HacConfig, hac_cov, sigma_hat, sigma_profile, tau_hat
from apps.kernels.services import GAUSSIAN, UNIFORM, VarianceKernel
from apps.simulate.services import AR_COEFFICIENTS, ar_noise
from apps.smoother.services import (
    ResidualField,
    SmootherConfig,
    nw_estimate,
    residual_field,
    smoothing_constants,
    window_weights,
)


def weights_at(p, q, k, n, m, kernel=None):
    cfg = SmootherConfig(k) if kernel is None else SmootherConfig(k, kernel)
    return window_weights(Position(0.0, 0.0, p, q), cfg, n, m)


def brute_force(res, w1, w2, cfg):
    """Explicit quadruple sum over both windows."""
    total = 0.0
    items1 = list(w1.items())
    items2 = list(w2.items())
    for (i1, j1, c1), (i2, j2, c2) in itertools.product(items1, items2):
        total += (
            c1 * c2
            * res.values[i1 - 1, j1 - 1] * res.values[i2 - 1, j2 - 1]
            * cfg.kernel((i1 - i2) / cfg.bandwidth)
            * cfg.kernel((j1 - j2) / cfg.bandwidth)
        )
    return total


class HacCovTest(SimpleTestCase):
    """Test the lag-sum HAC covariance."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(31)

    def test_matches_quadruple_sum(self):
        """Test the lag sum equals the explicit quadruple sum on small fields."""
        for _ in range(25):
            n, m = self.rng.integers(6, 13, size=2)
            k = int(self.rng.integers(1, 3))
            cfg = HacConfig(float(self.rng.integers(1, 3)))
            res = ResidualField.from_noise(self.rng.standard_normal((n, m)))
            p1, p2 = self.rng.integers(k + 1, n - k + 1, size=2)
            q1, q2 = self.rng.integers(k + 1, m - k + 1, size=2)
            w1 = weights_at(int(p1), int(q1), k, n, m)
            w2 = weights_at(int(p2), int(q2), k, n, m)
            self.assertAlmostEqual(hac_cov(res, w1, w2, cfg), brute_force(res, w1, w2, cfg), delta=1e-10)

    def test_same_window_eight_by_eight(self):
        """Test v1 = v2 on an 8x8 field with K=1, B=2."""
        res = ResidualField.from_noise(self.rng.standard_normal((8, 8)))
        w = weights_at(4, 5, 1, 8, 8)
        cfg = HacConfig(2.0)
        self.assertAlmostEqual(hac_cov(res, w, w, cfg), brute_force(res, w, w, cfg), delta=1e-10)

    def test_symmetry(self):
        """Test hac_cov(w1, w2) = hac_cov(w2, w1)."""
        res = residual_field(Field(self.rng.standard_normal((30, 30))), SmootherConfig(3))
        w1, w2 = weights_at(10, 12, 3, 30, 30), weights_at(14, 9, 3, 30, 30)
        cfg = HacConfig(2.0)
        self.assertAlmostEqual(hac_cov(res, w1, w2, cfg), hac_cov(res, w2, w1, cfg), delta=1e-12)

    def test_quadratic_in_residuals(self):
        """Test scaling residuals by lambda scales the covariance by lambda^2."""
        values = self.rng.standard_normal((20, 20))
        w1, w2 = weights_at(8, 8, 2, 20, 20), weights_at(10, 11, 2, 20, 20)
        cfg = HacConfig(1.5)
        base = hac_cov(ResidualField.from_noise(values), w1, w2, cfg)
        scaled = hac_cov(ResidualField.from_noise(3.0 * values), w1, w2, cfg)
        self.assertAlmostEqual(scaled, 9.0 * base, delta=1e-12 * max(1.0, abs(scaled)))

    def test_disjoint_windows(self):
        """Test far-apart windows give zero with B=1."""
        res = residual_field(Field(self.rng.standard_normal((40, 40))), SmootherConfig(2))
        w1, w2 = weights_at(10, 10, 2, 40, 40), weights_at(30, 30, 2, 40, 40)
        self.assertEqual(hac_cov(res, w1, w2, HacConfig(1.0)), 0.0)
        w3 = weights_at(10, 23, 2, 40, 40)
        self.assertLessEqual(abs(hac_cov(res, w1, w3, HacConfig(1.0))), 1e-8)

    def test_zero_residuals(self):
        """Test zero residuals give zero."""
        res = ResidualField.from_noise(np.zeros((10, 10)))
        w = weights_at(5, 5, 2, 10, 10)
        self.assertEqual(hac_cov(res, w, w, HacConfig(2.0)), 0.0)

    def test_window_outside_residual_interior(self):
        """Test a window touching undefined residuals raises BoundaryError."""
        res = residual_field(Field(self.rng.standard_normal((20, 20))), SmootherConfig(3))
        w = weights_at(4, 10, 3, 20, 20)
        with self.assertRaises(BoundaryError):
            hac_cov(res, w, w, HacConfig(1.0))

    def test_rejects_bad_bandwidth(self):
        """Test B must be positive."""
        with self.assertRaises(ConfigError):
            HacConfig(0.0)
        self.assertIs(HacConfig(2).kernel, GAUSSIAN)


class SigmaHatTest(SimpleTestCase):
    """Test local standard deviations and scales."""

    def test_zero_residuals(self):
        """Test zero residuals give sigma 0 without a flag."""
        res = ResidualField.from_noise(np.zeros((12, 12)))
        self.assertEqual(sigma_hat(res, weights_at(6, 6, 2, 12, 12), HacConfig(1.0)), (0.0, False))

    def test_square_equals_hac(self):
        """Test sigma^2 equals the HAC variance when it is nonnegative."""
        rng = np.random.default_rng(8)
        res = ResidualField.from_noise(rng.standard_normal((25, 25)))
        w = weights_at(12, 13, 4, 25, 25)
        cfg = HacConfig(2.0)
        value, flag = sigma_hat(res, w, cfg)
        self.assertFalse(flag)
        self.assertAlmostEqual(value ** 2, hac_cov(res, w, w, cfg), places=12)

    def test_zero_lag_noise(self):
        """Test a tiny bandwidth keeps only zero lags for i.i.d. noise."""
        rng = np.random.default_rng(1234)
        res = ResidualField.from_noise(rng.standard_normal((60, 60)))
        cfg = HacConfig(1e-6)
        weights = [weights_at(p, q, 10, 60, 60) for p in (15, 30, 45) for q in (15, 30, 45)]
        sigma, flags = sigma_profile(res, weights, cfg)
        self.assertFalse(flags.any())
        for w, value in zip(weights, sigma):
            rows, cols = w.slices
            expected = np.sqrt(np.sum(w.block ** 2 * res.values[rows, cols] ** 2))
            self.assertAlmostEqual(value, expected, places=10)
        self.assertGreaterEqual(sigma.mean(), 0.8)
        self.assertLessEqual(sigma.mean(), 1.2)

    def test_negative_variance_is_clipped(self):
        """Test a kernel with a negative lag weight can clip to zero."""
        dipole = VarianceKernel.custom(
            'dipole', lambda x: np.where(x == 0, 1.0, np.where(np.abs(x) == 1, -0.9, 0.0))
        )
        columns = (-1.0) ** np.arange(6)
        res = ResidualField.from_noise(np.tile(columns, (6, 1)))
        w = weights_at(3, 3, 1, 6, 6, kernel=UNIFORM)
        cfg = HacConfig(1.0, dipole)
        self.assertLess(hac_cov(res, w, w, cfg), 0.0)
        with self.assertLogs('apps.hac.services', level='WARNING'):
            self.assertEqual(sigma_hat(res, w, cfg), (0.0, True))

    def test_tau(self):
        """Test the homogeneous and heterogeneous scales."""
        self.assertEqual(tau_hat(0.37, BootstrapMode.HOMOGENEOUS), 1.0)
        self.assertEqual(tau_hat(1.0, 'heterogeneous'), 1.0)
        self.assertAlmostEqual(tau_hat(0.008, BootstrapMode.HETEROGENEOUS), 0.2, places=14)
        self.assertAlmostEqual(tau_hat(0.0, BootstrapMode.HETEROGENEOUS), 1e-8 ** (1 / 3), places=14)


def ar_window_variance(w, n, m, margin):
    """
    Exact variance of sum c * e for AR noise started from zeros `margin` cells out.

    Runs the adjoint recursion g(i, j) = c(i, j) + a_up g(i+1, j) + a_left g(i, j+1)
    + a_diag g(i+1, j+1) from the bottom row up, and weights g^2 by the
    innovation variance of every extended cell.
    """
    a_up, a_left, a_diag = AR_COEFFICIENTS
    c = np.zeros((n + margin, m + margin))
    rows, cols = w.slices
    c[margin:, margin:][rows, cols] = w.block
    col_coords = np.arange(1 - margin, m + 1) / m
    below = np.zeros(m + margin)
    total = 0.0
    for index in range(n + margin - 1, -1, -1):
        row = index + 1 - margin
        right_below = np.concatenate([below[1:], [0.0]])
        v = c[index] + a_up * below + a_diag * right_below
        g = signal.lfilter([1.0], [1.0, -a_left], v[::-1])[::-1]
        d = np.abs(row / n - col_coords)
        total += float(np.sum(g ** 2 * ((0.7 + 0.5 * d) * (0.5 + 0.7 * d)) ** 2))
        below = g
    return total


class HacConsistencyTest(SimpleTestCase):
    """Test sigma_hat^2 tracks the variance of the scaled estimate on AR noise."""

    n = m = 200
    k = 10
    margin = 200
    runs = 100

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        smoother = SmootherConfig(cls.k)
        hac = HacConfig(2.0)
        t_nm, b_nm = smoothing_constants(smoother)
        cls.positions = [Position(0.5, 0.5, 100, 100), Position(0.2, 0.8, 40, 160)]
        cls.weights = [window_weights(pos, smoother, cls.n, cls.m) for pos in cls.positions]
        scaled, variances = [], []
        for seed in range(cls.runs):
            field = Field(ar_noise(cls.n, cls.m, 5000 + seed, margin=cls.margin))
            res = residual_field(field, smoother)
            scaled.append([t_nm / b_nm * nw_estimate(field, pos, smoother) for pos in cls.positions])
            variances.append([sigma_hat(res, w, hac).value ** 2 for w in cls.weights])
        cls.scaled = np.array(scaled)
        cls.variances = np.array(variances)

    def test_weights_match_estimate(self):
        """Test the scaled estimate is the weighted window sum."""
        field = Field(ar_noise(self.n, self.m, 1, margin=self.margin))
        smoother = SmootherConfig(self.k)
        t_nm, b_nm = smoothing_constants(smoother)
        for pos, w in zip(self.positions, self.weights):
            rows, cols = w.slices
            self.assertAlmostEqual(
                t_nm / b_nm * nw_estimate(field, pos, smoother), float(np.sum(w.block * field.values[rows, cols])),
                places=10,
            )

    def test_mean_sigma_within_band(self):
        """Test the average sigma_hat^2 is within 15% of the true variance."""
        for v, w in enumerate(self.weights):
            exact = ar_window_variance(w, self.n, self.m, self.margin)
            ratio = float(self.variances[:, v].mean()) / exact
            self.assertGreater(ratio, 0.85, f"position {v}: ratio {ratio:.3f}")
            self.assertLess(ratio, 1.15, f"position {v}: ratio {ratio:.3f}")

    def test_monte_carlo_variance(self):
        """Test the Monte-Carlo variance of the scaled estimate against the exact one."""
        for v, w in enumerate(self.weights):
            exact = ar_window_variance(w, self.n, self.m, self.margin)
            empirical = float(np.mean(self.scaled[:, v] ** 2))
            # a variance from `runs` near-Gaussian draws has relative SE about sqrt(2 / runs)
            self.assertLess(abs(empirical / exact - 1.0), 4 * np.sqrt(2.0 / self.runs))
