"""
Tests for bootstrap app.
"""
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.bootstrap.serializers import (
    RESULT_SCHEMA,
    BootstrapResultSerializer,
    VerdictSerializer,
    dump_result,
    load_result,
    render_json,
    result_payload,
    verdict_payload,
)
from apps.bootstrap.services import (
    BootstrapConfig,
    build_panels,
    dependent_wild_field,
    quantile_c,
    quantile_index,
    replicate,
    run_lwmb,
    test_mean,
    weighted_max,
)
from apps.grid.exceptions import ConfigError, FormatError
from apps.grid.services import Field, PositionGrid, make_position_grid
from apps.hac.services import BootstrapMode, HacConfig, hac_cov
from apps.kernels.services import BARTLETT, GAUSSIAN, UNIFORM
from apps.simulate.services import NoiseKind, simulate_noise
from apps.smoother.services import ResidualField, SmootherConfig, residual_field
from apps.toeplitz.services import build_row, build_sqrt, sqrt_dense


def config(k=3, b=2.0, reps=50, alpha=0.1, mode=BootstrapMode.HOMOGENEOUS, seed=7, **kwargs):
    return BootstrapConfig(
        reps=reps,
        alpha=alpha,
        mode=mode,
        seed=seed,
        hac=kwargs.pop('hac', HacConfig(b)),
        smoother=kwargs.pop('smoother', SmootherConfig(k)),
        **kwargs,
    )


def dense_panels(res, grid, cfg):
    n, m = res.shape
    qn = sqrt_dense(build_row(n, cfg.hac.bandwidth, cfg.hac.kernel))
    qm = sqrt_dense(build_row(m, cfg.hac.bandwidth, cfg.hac.kernel))
    return build_panels(res, grid, cfg, qn, qm)


def grid_of(anchors, n, m):
    return PositionGrid.from_coordinates([(p / n, q / m) for p, q in anchors], n, m)


class WeightedMaxTest(SimpleTestCase):
    """Test the weighted maximum."""

    def test_unit_scales(self):
        """Test unit scales give the largest absolute increment."""
        self.assertEqual(weighted_max(np.array([1.0, -3.0, 2.0]), np.ones(3)), 3.0)

    def test_scaled(self):
        """Test per-position scales."""
        self.assertEqual(weighted_max(np.array([1.0, -3.0]), np.array([1.0, 3.0])), 1.0)

    def test_homogeneity(self):
        """Test scaling all tau by lambda divides the result by lambda."""
        increments = np.array([0.4, -1.7, 0.9, 2.2])
        tau = np.array([0.5, 1.5, 1.0, 2.0])
        self.assertAlmostEqual(weighted_max(increments, 4.0 * tau), weighted_max(increments, tau) / 4.0, places=15)


class QuantileTest(SimpleTestCase):
    """Test the order-statistic quantile."""

    def test_examples(self):
        """Test the documented index examples."""
        self.assertEqual(quantile_index(100, 0.05), 95)
        self.assertEqual(quantile_index(10, 0.05), 10)
        self.assertEqual(quantile_c([4.2], 0.3), 4.2)
        self.assertEqual(quantile_c(np.arange(1.0, 101.0), 0.05), 95.0)

    def test_matches_enumeration(self):
        """Test against direct enumeration of the min-set."""
        for reps in range(1, 201):
            sample = np.sort(np.random.default_rng(reps).standard_normal(reps))
            for alpha in (0.01, 0.05, 0.1):
                t = min(t for t in range(1, reps + 1) if t / reps >= 1 - alpha)
                self.assertEqual(quantile_c(sample, alpha), sample[t - 1])

    def test_monotone_in_alpha(self):
        """Test smaller alpha never gives a smaller quantile."""
        sample = np.sort(np.random.default_rng(0).exponential(size=137))
        values = [quantile_c(sample, alpha) for alpha in (0.01, 0.05, 0.1, 0.2, 0.5)]
        self.assertEqual(values, sorted(values, reverse=True))


class BootstrapConfigTest(SimpleTestCase):
    """Test configuration checks."""

    def test_alpha_out_of_range(self):
        """Test alpha outside (0, 1) is rejected."""
        for alpha in (0.0, 1.0, 1.5, -0.1):
            with self.assertRaisesMessage(ConfigError, 'alpha out of range'):
                config(alpha=alpha)

    def test_few_replicates_warn(self):
        """Test a warning when reps < ceil(1/alpha)."""
        with self.assertLogs('apps.bootstrap.services', level='WARNING'):
            config(reps=10, alpha=0.05)

    def test_bad_replicates_and_seed(self):
        """Test replicate count and seed validation."""
        with self.assertRaises(ConfigError):
            config(reps=0)
        with self.assertRaises(ConfigError):
            config(seed=-1)


class LocalSumPanelTest(SimpleTestCase):
    """Test local-sum panels and replicates."""

    def setUp(self):
        """Set up test data."""
        self.rng = np.random.default_rng(99)

    def test_zero_residuals(self):
        """Test zero residuals give zero panels and replicates."""
        res = ResidualField.from_noise(np.zeros((12, 12)))
        cfg = config(k=2)
        panel = dense_panels(res, grid_of([(5, 5), (8, 7)], 12, 12), cfg)
        for v in range(panel.V):
            self.assertFalse(panel.matrix(v).any())
        np.testing.assert_array_equal(replicate(panel, 3, cfg), np.zeros(2))

    def test_identity_roots(self):
        """Test W_v is the weighted residual block when the roots are identities."""
        values = self.rng.standard_normal((8, 8))
        res = ResidualField.from_noise(values)
        cfg = config(k=1, hac=HacConfig(0.5, BARTLETT), smoother=SmootherConfig(1, UNIFORM))
        panel = dense_panels(res, grid_of([(4, 5)], 8, 8), cfg)
        expected = np.zeros((8, 8))
        expected[2:5, 3:6] = values[2:5, 3:6]
        np.testing.assert_allclose(panel.matrix(0), expected, atol=1e-12)

    def test_contraction_orderings_agree(self):
        """Test window sums of Q E Q equal sum W_v * E."""
        res = ResidualField.from_noise(self.rng.standard_normal((10, 10)))
        cfg = config(k=2)
        panel = dense_panels(res, grid_of([(3, 3), (5, 6), (8, 8)], 10, 10), cfg)
        for _ in range(5):
            e = self.rng.standard_normal((10, 10))
            np.testing.assert_allclose(panel.contract(e), panel.contract_direct(e), atol=1e-9)

    def test_dependent_wild_field(self):
        """Test the correlated multiplier field is Q_n E Q_m."""
        qn = build_sqrt(6, 2.0, GAUSSIAN, 'dense')
        qm = build_sqrt(5, 2.0, GAUSSIAN, 'dense')
        e = self.rng.standard_normal((6, 5))
        np.testing.assert_allclose(dependent_wild_field(qn, qm, e), qn.matrix() @ e @ qm.matrix(), atol=1e-12)

    def test_mismatched_roots(self):
        """Test roots built for another bandwidth or size are rejected."""
        res = ResidualField.from_noise(np.ones((10, 10)))
        grid = grid_of([(5, 5)], 10, 10)
        cfg = config(k=2, b=2.0)
        good = sqrt_dense(build_row(10, 2.0, GAUSSIAN))
        with self.assertRaises(ConfigError):
            build_panels(res, grid, cfg, sqrt_dense(build_row(10, 3.0, GAUSSIAN)), good)
        with self.assertRaises(ConfigError):
            build_panels(res, grid, cfg, good, sqrt_dense(build_row(9, 2.0, GAUSSIAN)))
        with self.assertRaises(ConfigError):
            build_panels(res, grid, cfg, good, sqrt_dense(build_row(10, 2.0, BARTLETT)))

    def test_replicate_deterministic(self):
        """Test a replicate depends only on (seed, rep_index)."""
        res = ResidualField.from_noise(self.rng.standard_normal((16, 16)))
        cfg = config(k=2)
        panel = dense_panels(res, grid_of([(6, 6), (10, 11)], 16, 16), cfg)
        first = replicate(panel, 12, cfg)
        replicate(panel, 13, cfg)
        np.testing.assert_array_equal(first, replicate(panel, 12, cfg))
        self.assertFalse(np.array_equal(first, replicate(panel, 13, cfg)))


class ConditionalCovarianceTest(SimpleTestCase):
    """Test the bootstrap-world covariance of the increments."""

    def setUp(self):
        """Set up test data."""
        noise = simulate_noise(NoiseKind.AR2D, 60, 60, seed=2023)
        self.res = residual_field(noise, SmootherConfig(3))
        self.cfg = config(k=3, b=2.0, reps=50_000, alpha=0.05, seed=11)
        self.grid = grid_of([(25, 28), (28, 31)], 60, 60)
        self.panel = dense_panels(self.res, self.grid, self.cfg)

    def test_exact_covariance_equals_hac(self):
        """Test <W_1, W_2> / B_nm^2 equals the HAC covariance with dense roots."""
        w1, w2 = self.panel.weights
        for a, b in ((w1, w1), (w1, w2), (w2, w2)):
            expected = hac_cov(self.res, a, b, self.cfg.hac)
            got = self.panel.covariance(self.panel.weights.index(a), self.panel.weights.index(b))
            self.assertAlmostEqual(got, expected, delta=1e-9 * max(1.0, abs(expected)))

    def test_monte_carlo_covariance(self):
        """Test the empirical replicate covariance against the HAC covariance."""
        reps = self.cfg.reps
        draws = np.array([replicate(self.panel, r, self.cfg) for r in range(reps)])
        w1, w2 = self.panel.weights
        var1 = hac_cov(self.res, w1, w1, self.cfg.hac)
        var2 = hac_cov(self.res, w2, w2, self.cfg.hac)
        cov12 = hac_cov(self.res, w1, w2, self.cfg.hac)
        # Increments are exactly Gaussian given the data, so Var(XY) = var1 var2 + cov12^2.
        empirical = float(np.mean(draws[:, 0] * draws[:, 1]))
        se = math.sqrt((var1 * var2 + cov12 ** 2) / reps)
        self.assertLessEqual(abs(empirical - cov12), 4 * se)
        empirical_var = float(np.mean(draws[:, 0] ** 2))
        self.assertLessEqual(abs(empirical_var - var1), 4 * math.sqrt(2 * var1 ** 2 / reps))

    def test_fft_roots_match_dense_away_from_edges(self):
        """Test FFT and dense panels give the same covariance on interior windows."""
        noise = simulate_noise(NoiseKind.IID_NORMAL, 64, 64, seed=5)
        res = residual_field(noise, SmootherConfig(3))
        cfg = config(k=3, b=2.0)
        grid = grid_of([(30, 30), (33, 35)], 64, 64)
        dense = dense_panels(res, grid, cfg)
        fft = build_panels(res, grid, cfg, build_sqrt(64, 2.0, GAUSSIAN, 'fft'), build_sqrt(64, 2.0, GAUSSIAN, 'fft'))
        scale = float(np.sum(np.abs(dense.blocks[0])) * np.sum(np.abs(dense.blocks[1])))
        for v1, v2 in ((0, 0), (0, 1), (1, 1)):
            bound = 3e-6 * scale / dense.b_nm ** 2
            self.assertLessEqual(abs(fft.covariance(v1, v2) - dense.covariance(v1, v2)), bound)

    def test_fft_covariance_exact_at_edges(self):
        """Test FFT panels reproduce the HAC covariance in the edge-most windows."""
        noise = simulate_noise(NoiseKind.AR2D, 64, 64, seed=9)
        res = residual_field(noise, SmootherConfig(3))
        cfg = config(k=3, b=5.0)
        grid = grid_of([(7, 7), (7, 58), (58, 58)], 64, 64)
        fft = build_panels(res, grid, cfg, build_sqrt(64, 5.0, GAUSSIAN, 'fft'), build_sqrt(64, 5.0, GAUSSIAN, 'fft'))
        for v1, v2 in ((0, 0), (0, 1), (1, 2), (2, 2)):
            expected = hac_cov(res, fft.weights[v1], fft.weights[v2], cfg.hac)
            got = fft.covariance(v1, v2)
            self.assertAlmostEqual(got, expected, delta=1e-9 * max(1.0, abs(expected)))

    def test_fft_contraction_orderings_agree(self):
        """Test window sums of the sampled field equal sum W_v * E with FFT roots."""
        res = residual_field(simulate_noise(NoiseKind.IID_NORMAL, 24, 20, seed=3), SmootherConfig(2))
        cfg = config(k=2, b=2.0)
        qn, qm = build_sqrt(24, 2.0, GAUSSIAN, 'fft'), build_sqrt(20, 2.0, GAUSSIAN, 'fft')
        panel = build_panels(res, grid_of([(5, 5), (12, 10), (19, 15)], 24, 20), cfg, qn, qm)
        self.assertEqual(panel.noise_shape, (64, 64))
        e = np.random.default_rng(2).standard_normal(panel.noise_shape)
        np.testing.assert_allclose(panel.contract(e), panel.contract_direct(e), atol=1e-9)
        np.testing.assert_allclose(
            dependent_wild_field(qn, qm, e), qn.sampling_matrix() @ e @ qm.sampling_matrix().T, atol=1e-10
        )


class RunLwmbTest(SimpleTestCase):
    """Test the end-to-end bootstrap."""

    def setUp(self):
        """Set up test data."""
        self.values = np.random.default_rng(4).standard_normal((40, 40))
        self.grid = make_position_grid(40, 40, 3, 4)

    def test_zero_noise_constant_field(self):
        """Test a noise-free constant field gives degenerate intervals."""
        result = run_lwmb(Field(np.full((40, 40), 2.0)), self.grid, config())
        np.testing.assert_allclose(result.estimates.estimates, 2.0, rtol=1e-14)
        self.assertTrue(np.all(np.abs(result.half_widths) <= 1e-12))

    def test_half_widths(self):
        """Test half widths follow B_nm tau C* / T_nm and samples are sorted."""
        cfg = config(mode=BootstrapMode.HETEROGENEOUS)
        result = run_lwmb(Field(self.values), self.grid, cfg)
        est = result.estimates
        self.assertTrue(np.all(np.diff(result.t_samples) >= 0))
        self.assertEqual(result.c_quantile, result.t_samples[quantile_index(cfg.reps, cfg.alpha) - 1])
        np.testing.assert_allclose(result.tau, np.cbrt(np.maximum(result.sigma, 1e-8)), rtol=1e-14)
        np.testing.assert_allclose(result.half_widths, est.b_nm * result.tau / est.t_nm * result.c_quantile, rtol=1e-14)
        self.assertTrue(np.all(result.half_widths > 0))
        np.testing.assert_allclose(result.upper - result.lower, 2 * result.half_widths, rtol=1e-12)

    def test_deterministic_across_threads(self):
        """Test identical results for repeated runs and thread counts."""
        cfg = config(reps=40)
        first = dump_result(run_lwmb(Field(self.values), self.grid, cfg, threads=1))
        self.assertEqual(first, dump_result(run_lwmb(Field(self.values), self.grid, cfg, threads=1)))
        self.assertEqual(first, dump_result(run_lwmb(Field(self.values), self.grid, cfg, threads=8)))

    def test_affine_shift_leaves_samples(self):
        """Test adding an affine field shifts estimates but not the bootstrap maxima."""
        i, j = np.meshgrid(np.arange(1, 41) / 40, np.arange(1, 41) / 40, indexing='ij')
        delta = 0.5 + 2.0 * i - 1.0 * j
        cfg = config(reps=30)
        base = run_lwmb(Field(self.values), self.grid, cfg)
        shifted = run_lwmb(Field(self.values + delta), self.grid, cfg)
        np.testing.assert_allclose(shifted.t_samples, base.t_samples, rtol=1e-9, atol=1e-12)
        p, q = self.grid.anchors()
        np.testing.assert_allclose(
            shifted.estimates.estimates - base.estimates.estimates, delta[p - 1, q - 1], atol=1e-10
        )


class TestMeanTest(SimpleTestCase):
    """Test simultaneous mean tests."""

    def setUp(self):
        """Set up test data."""
        values = np.random.default_rng(21).standard_normal((40, 40))
        self.grid = make_position_grid(40, 40, 3, 3)
        self.result = run_lwmb(Field(values), self.grid, config(reps=60))

    def test_null_equals_estimate(self):
        """Test mu0 = mu_hat never rejects."""
        verdict = test_mean(self.result, self.result.estimates.estimates.copy())
        self.assertEqual(verdict.statistic, 0.0)
        self.assertFalse(verdict.reject)
        self.assertEqual(verdict.flagged, [])

    def test_forced_exceedance(self):
        """Test a large shift at one position is rejected and flagged."""
        mu0 = self.result.estimates.estimates.copy()
        mu0[4] += 10 * self.result.half_widths.max()
        verdict = test_mean(self.result, mu0)
        self.assertTrue(verdict.reject)
        self.assertEqual(verdict.flagged, [4])
        self.assertEqual(verdict.flagged_positions, (self.grid[4],))

    def test_null_forms(self):
        """Test callable, vector, grid and lattice nulls agree."""
        x, y = self.grid.coordinates()
        self.assertAlmostEqual(
            test_mean(self.result, lambda a, b: 0.1 * a - 0.2 * b).statistic,
            test_mean(self.result, 0.1 * x - 0.2 * y).statistic,
            places=12,
        )
        p, q = self.grid.anchors()
        vector = 0.1 * p / 40 - 0.2 * q / 40
        lattice = np.fromfunction(lambda i, j: 0.1 * (i + 1) / 40 - 0.2 * (j + 1) / 40, (40, 40))
        statistics = [test_mean(self.result, form).statistic for form in (vector, vector.reshape(3, 3), lattice)]
        for statistic in statistics[1:]:
            self.assertAlmostEqual(statistic, statistics[0], places=12)

    def test_non_conformable_null(self):
        """Test a null of the wrong shape is rejected."""
        with self.assertRaises(ConfigError):
            test_mean(self.result, np.zeros(7))
        with self.assertRaises(ConfigError):
            test_mean(self.result, np.zeros((39, 40)))


class BootstrapResultSerializerTest(SimpleTestCase):
    """Test the lwmb-result/1 document."""

    def setUp(self):
        """Set up test data."""
        values = np.random.default_rng(3).standard_normal((30, 30))
        grid = make_position_grid(30, 30, 3, 2)
        result = run_lwmb(Field(values), grid, config(reps=20, mode=BootstrapMode.HETEROGENEOUS))
        self.result = result.with_verdict(test_mean(result, 0.0 * result.estimates.estimates))

    def test_document_validates(self):
        """Test the rendered document validates against the serializer."""
        data = json.loads(dump_result(self.result))
        self.assertEqual(data['schema'], RESULT_SCHEMA)
        self.assertEqual(data['mode'], 'heterogeneous')
        self.assertEqual(len(data['positions']), 4)
        self.assertEqual(len(data['sigma']), 4)
        serializer = BootstrapResultSerializer(data=data)
        self.assertTrue(serializer.is_valid(), serializer.errors)

    def test_load_result(self):
        """Test reading a result file back."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'result.json'
            path.write_bytes(dump_result(self.result))
            data = load_result(path)
            self.assertEqual(data['k'], 3)
            self.assertEqual(data['verdict']['reject'], self.result.verdict.reject)

            payload = result_payload(self.result)
            payload['schema'] = 'lwmb-result/0'
            path.write_text(json.dumps(payload))
            with self.assertRaises(FormatError):
                load_result(path)

    def test_verdict_flagged_positions(self):
        """Test flagged entries are reported with their coordinates and anchors."""
        result = self.result
        mu0 = result.estimates.estimates.copy()
        mu0[2] += 10 * result.half_widths.max()
        data = json.loads(render_json(VerdictSerializer(verdict_payload(test_mean(result, mu0))).data))
        pos = result.positions[2]
        self.assertEqual(data['flagged'], [2])
        self.assertEqual(data['flagged_positions'], [{'x': pos.x, 'y': pos.y, 'p': pos.p, 'q': pos.q}])
        serializer = VerdictSerializer(data=data)
        self.assertTrue(serializer.is_valid(), serializer.errors)

        data['flagged_positions'] = []
        self.assertFalse(VerdictSerializer(data=data).is_valid())
