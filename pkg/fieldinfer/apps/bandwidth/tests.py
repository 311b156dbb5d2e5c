"""
Tests for bandwidth app.
"""
import numpy as np
from django.test import SimpleTestCase

from apps.bandwidth.serializers import BandwidthSelectionSerializer, selection_payload
from apps.bandwidth.services import (
    DEFAULT_GAMMA,
    CvConfig,
    VbConfig,
    block_size,
    cv_select_k,
    loo_error,
    perturbed_residual_mean,
    select_variance_bandwidth,
)
from apps.grid.exceptions import BandwidthTooLargeError, BlockTooSmallError, ConfigError
from apps.grid.services import Field
from apps.kernels.services import BARTLETT, GAUSSIAN, QUARTIC
from apps.simulate.services import NoiseKind, simulate_noise
from apps.smoother.services import ResidualField, SmootherConfig, kernel_weights, residual_field, smoothing_constants
from apps.toeplitz.services import build_sqrt


def brute_loo(values, k):
    """Leave-one-out error by explicit loops."""
    cfg = SmootherConfig(k, QUARTIC)
    g = kernel_weights(cfg)
    t_nm, _ = smoothing_constants(cfg)
    n, m = values.shape
    total = 0.0
    for i in range(2 * k + 1, n - 2 * k + 1):
        for j in range(2 * k + 1, m - 2 * k + 1):
            acc = 0.0
            for u in range(-k, k + 1):
                for v in range(-k, k + 1):
                    if u == 0 and v == 0:
                        continue
                    acc += values[i + u - 1, j + v - 1] * g[u + k] * g[v + k]
            total += (values[i - 1, j - 1] - acc / t_nm) ** 2
    return total


class CvSelectKTest(SimpleTestCase):
    """Test leave-one-out selection of the smoothing bandwidth."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(12)

    def test_matches_brute_force(self):
        """Test scores against explicit loops on 30x30 fields."""
        values = self.rng.standard_normal((30, 30)) + np.linspace(0, 3, 30)[:, None]
        selection = cv_select_k(Field(values), CvConfig(3))
        for k in (1, 2, 3):
            self.assertAlmostEqual(selection.scores[k], brute_loo(values, k), delta=1e-9)

    def test_constant_mean_prefers_widest(self):
        """Test a constant mean with noise selects k_max with decreasing errors."""
        values = 5.0 + self.rng.standard_normal((100, 100))
        selection = cv_select_k(Field(values), CvConfig(5))
        self.assertEqual(selection.k_best, 5)
        scores = [selection.scores[k] for k in range(1, 6)]
        self.assertTrue(all(a > b for a, b in zip(scores, scores[1:])))

    def test_checkerboard_prefers_narrowest(self):
        """Test a high-frequency mean selects K=1."""
        i, j = np.indices((200, 200))
        values = (-1.0) ** (i + j) + 1e-3 * self.rng.standard_normal((200, 200))
        self.assertEqual(cv_select_k(Field(values), CvConfig(3)).k_best, 1)

    def test_skips_wide_candidates(self):
        """Test candidates too wide for the field are skipped."""
        with self.assertLogs('apps.bandwidth.services', level='WARNING'):
            selection = cv_select_k(Field(self.rng.standard_normal((20, 20))), CvConfig(6))
        self.assertEqual(sorted(selection.scores), [1, 2, 3, 4])

    def test_no_candidate(self):
        """Test a field too small for every candidate."""
        with self.assertRaises(BandwidthTooLargeError):
            cv_select_k(Field(np.zeros((5, 5))), CvConfig(1))

    def test_thread_count_does_not_matter(self):
        """Test identical scores for 1 and 4 workers."""
        field = Field(self.rng.standard_normal((40, 40)))
        self.assertEqual(cv_select_k(field, CvConfig(4), threads=1), cv_select_k(field, CvConfig(4), threads=4))

    def test_loo_error_direct(self):
        """Test the single-candidate error helper."""
        values = self.rng.standard_normal((14, 14))
        self.assertAlmostEqual(loo_error(Field(values), 2), brute_loo(values, 2), delta=1e-9)

    def test_config(self):
        """Test k_max validation."""
        with self.assertRaises(ConfigError):
            CvConfig(0)


class SelectVarianceBandwidthTest(SimpleTestCase):
    """Test block-subsampling selection of the variance bandwidth."""

    def setUp(self):
        """Set up test data."""
        self.field = Field(np.random.default_rng(8).standard_normal((80, 80)))
        self.cfg = VbConfig(q=0.2, gamma=(1, 2, 3), iterations=4, pilot=3.0, reps=20, seed=5)

    def test_zero_residuals(self):
        """Test zero residuals give zero losses and the smallest candidate."""
        cfg = VbConfig(q=0.2, gamma=(3, 1, 2), iterations=3, reps=10, seed=1)
        selection = select_variance_bandwidth(Field(np.zeros((100, 100))), 3, cfg)
        self.assertEqual(selection.b_best, 1.0)
        self.assertEqual(set(selection.losses.values()), {0.0})
        self.assertEqual(selection.sigma2, 0.0)

    def test_deterministic(self):
        """Test identical selections for the same seed and any thread count."""
        first = select_variance_bandwidth(self.field, 2, self.cfg, threads=1)
        second = select_variance_bandwidth(self.field, 2, self.cfg, threads=3)
        self.assertEqual(first, second)
        self.assertIn(first.b_best, (1.0, 2.0, 3.0))
        self.assertGreater(first.sigma2, 0.0)

    def test_candidate_order_irrelevant(self):
        """Test relabeling the candidate set does not change the choice."""
        shuffled = VbConfig(q=0.2, gamma=(3, 1, 2, 2), iterations=4, pilot=3.0, reps=20, seed=5)
        first = select_variance_bandwidth(self.field, 2, self.cfg)
        second = select_variance_bandwidth(self.field, 2, shuffled)
        self.assertEqual(first.b_best, second.b_best)
        self.assertEqual(first.losses, second.losses)

    def test_corners_in_range(self):
        """Test block corners stay inside the field."""
        selection = select_variance_bandwidth(self.field, 2, self.cfg)
        n0, m0 = block_size(80, 80, 0.2)
        self.assertEqual((n0, m0), (17, 17))
        self.assertEqual(len(selection.corners), 4)
        for u, v in selection.corners:
            self.assertTrue(1 <= u <= 80 - 16)
            self.assertTrue(1 <= v <= 80 - 16)

    def test_block_too_small(self):
        """Test blocks that cannot host the window."""
        with self.assertRaises(BlockTooSmallError):
            select_variance_bandwidth(Field(np.zeros((100, 100))), 10, VbConfig())

    def test_perturbed_mean_with_identity_roots(self):
        """Test the residual grand mean with identity roots."""
        rng = np.random.default_rng(0)
        res = ResidualField.from_noise(rng.standard_normal((9, 7)))
        e = rng.standard_normal((9, 7))
        qn, qm = build_sqrt(9, 0.5, BARTLETT), build_sqrt(7, 0.5, BARTLETT)
        self.assertAlmostEqual(perturbed_residual_mean(res, qn, qm, e), float(np.mean(res.values * e)), places=12)

    def test_config(self):
        """Test configuration validation."""
        for kwargs in ({'q': 0.0}, {'q': 1.0}, {'gamma': ()}, {'gamma': (0, 1)}, {'iterations': 0}, {'reps': 0}):
            with self.assertRaises(ConfigError):
                VbConfig(**kwargs)
        self.assertEqual(VbConfig().candidates, tuple(float(b) for b in range(1, 11)))

    def test_serializer(self):
        """Test the selection document validates."""
        cv = cv_select_k(self.field, CvConfig(3))
        vb = select_variance_bandwidth(self.field, cv.k_best, self.cfg)
        serializer = BandwidthSelectionSerializer(data=selection_payload(cv, vb))
        self.assertTrue(serializer.is_valid(), serializer.errors)


class DefaultBlockTest(SimpleTestCase):
    """Test the block statistic at the default n=m=200, q=0.1, K=10 setting."""

    def setUp(self):
        """Set up test data."""
        field = simulate_noise(NoiseKind.AR2D, 200, 200, seed=3)
        self.n0, self.m0 = block_size(200, 200, 0.1)
        block = Field(field.values[50:50 + self.n0, 80:80 + self.m0])
        self.res = residual_field(block, SmootherConfig(10))

    def test_single_interior_cell(self):
        """Test a 21x21 block keeps one residual for K=10."""
        self.assertEqual((self.n0, self.m0), (21, 21))
        self.assertEqual(int(self.res.mask.sum()), 1)
        self.assertTrue(self.res.mask[10, 10])

    def test_block_variance_does_not_depend_on_b(self):
        """Test every candidate's block variance estimates the squared center residual."""
        center = float(self.res.values[10, 10]) ** 2
        draws = np.random.default_rng(5).standard_normal((4000, self.n0, self.m0))
        for b in DEFAULT_GAMMA:
            q = build_sqrt(self.n0, b, GAUSSIAN)
            means = np.array([perturbed_residual_mean(self.res, q, q, e) for e in draws])
            self.assertLess(abs(float(np.var(means)) / center - 1.0), 0.12, f"B={b:g}")
