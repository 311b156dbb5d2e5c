"""
Tests for simulate app.
"""
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from apps.grid.exceptions import ConfigError
from apps.hac.services import BootstrapMode
from apps.simulate.serializers import StudyConfigSerializer
from apps.simulate.services import (
    MeanField,
    MeanFieldKind,
    NoiseKind,
    ar_noise,
    mean_lattice,
    mean_value,
    simulate_dataset,
    simulate_noise,
)
from apps.simulate.studies import (
    COVERAGE_HEADER,
    SIZE_POWER_HEADER,
    Hypothesis,
    StudyConfig,
    coverage_study,
    size_power_study,
    write_study_csv,
)


def lag_correlation(values, di, dj):
    """Sample correlation between e(i, j) and e(i - di, j - dj)."""
    n, m = values.shape
    a = values[di:, dj:].ravel()
    b = values[:n - di, :m - dj].ravel()
    return float(np.corrcoef(a, b)[0, 1])


class MeanValueTest(SimpleTestCase):
    """Test the mean fields."""

    def test_elliptical_peak(self):
        """Test the paraboloid peaks at the center."""
        self.assertEqual(mean_value(MeanFieldKind.ELLIPTICAL, 0.5, 0.5), 1.0)
        self.assertAlmostEqual(mean_value(MeanFieldKind.ELLIPTICAL, 0.0, 0.5), 1.0 - 1.5 * 0.25)

    def test_sinusoidal(self):
        """Test the sinusoidal surface against its closed form."""
        a, b = np.sin(2.0 * (0.2 - 0.6)), np.cos(3.0 * (0.7 - 0.3))
        self.assertAlmostEqual(mean_value(MeanFieldKind.SINUSOIDAL, 0.2, 0.7), a * a + b * b + a * b)

    def test_disc(self):
        """Test the disc signal inside and outside."""
        disc = MeanField(MeanFieldKind.DISC)
        self.assertEqual(mean_value(disc, 0.5, 0.55), 0.3)
        self.assertEqual(mean_value(disc, 0.9, 0.9), 0.0)

    def test_zero(self):
        """Test the zero field on arrays."""
        np.testing.assert_array_equal(mean_value(MeanFieldKind.ZERO, np.ones(3), np.ones(3)), np.zeros(3))

    def test_disc_radius(self):
        """Test a non-positive disc radius is rejected."""
        with self.assertRaises(ConfigError):
            MeanField(MeanFieldKind.DISC, radius=0.0)

    def test_lattice(self):
        """Test the lattice uses coordinates (i/n, j/m)."""
        lattice = mean_lattice(MeanFieldKind.ELLIPTICAL, 4, 2)
        self.assertEqual(lattice.shape, (4, 2))
        self.assertEqual(lattice[1, 0], mean_value(MeanFieldKind.ELLIPTICAL, 0.5, 0.5))


class SimulateNoiseTest(SimpleTestCase):
    """Test the noise generators."""

    def test_deterministic(self):
        """Test noise is a function of kind, shape and seed."""
        for kind in NoiseKind:
            self.assertEqual(simulate_noise(kind, 15, 12, seed=4), simulate_noise(kind, 15, 12, seed=4))
            self.assertNotEqual(simulate_noise(kind, 15, 12, seed=4), simulate_noise(kind, 15, 12, seed=5))

    def test_ma_mean(self):
        """Test the moving-average noise is centered."""
        values = simulate_noise(NoiseKind.MA2D, 400, 400, seed=11).values
        self.assertLess(abs(float(values.mean())), 0.02)

    def test_ar_correlation_signs(self):
        """Test the row lag correlates positively and the column lag negatively."""
        values = simulate_noise(NoiseKind.AR2D, 300, 300, seed=3).values
        self.assertGreater(lag_correlation(values, 1, 0), 0.1)
        self.assertLess(lag_correlation(values, 0, 1), -0.1)

    def test_ar_burn_in(self):
        """Test a wider burn-in margin leaves the field unchanged."""
        np.testing.assert_allclose(ar_noise(20, 20, 9, margin=200), ar_noise(20, 20, 9, margin=400), atol=1e-8)

    @override_settings(FIELDINFER_AR_BURN_IN=250)
    def test_ar_burn_in_setting(self):
        """Test the default margin comes from settings."""
        np.testing.assert_array_equal(simulate_noise(NoiseKind.AR2D, 8, 8, seed=1).values, ar_noise(8, 8, 1, margin=250))

    def test_negative_margin(self):
        """Test a negative margin is rejected."""
        with self.assertRaises(ConfigError):
            ar_noise(4, 4, 0, margin=-1)

    def test_bad_shape(self):
        """Test an empty lattice is rejected."""
        with self.assertRaises(ConfigError):
            simulate_noise(NoiseKind.IID_NORMAL, 0, 5, seed=0)


class SimulateDatasetTest(SimpleTestCase):
    """Test mean plus noise datasets."""

    def test_additive(self):
        """Test the dataset is the mean lattice plus the noise."""
        mean = MeanField(MeanFieldKind.SINUSOIDAL)
        data = simulate_dataset(mean, NoiseKind.MA2D, 25, 30, seed=2)
        noise = simulate_noise(NoiseKind.MA2D, 25, 30, seed=2)
        np.testing.assert_allclose(data.values - mean_lattice(mean, 25, 30), noise.values, atol=1e-12)

    def test_zero_mean_is_noise(self):
        """Test a zero mean returns the noise field exactly."""
        data = simulate_dataset(MeanFieldKind.ZERO, NoiseKind.AR2D, 12, 9, seed=8)
        self.assertEqual(data, simulate_noise(NoiseKind.AR2D, 12, 9, seed=8))

    def test_zero_scale(self):
        """Test noise_scale=0 returns the mean lattice."""
        data = simulate_dataset(MeanFieldKind.ELLIPTICAL, NoiseKind.AR2D, 10, 10, seed=2, noise_scale=0.0)
        np.testing.assert_array_equal(data.values, mean_lattice(MeanFieldKind.ELLIPTICAL, 10, 10))


class StudyTest(SimpleTestCase):
    """Test the Monte-Carlo study runners in eager mode."""

    def setUp(self):
        """Set up test data."""
        self.cfg = StudyConfig(
            n=30,
            m=30,
            mean=MeanField(MeanFieldKind.ELLIPTICAL),
            noise=NoiseKind.IID_NORMAL,
            grid_divisions=3,
            alpha=0.1,
            sims=2,
            boot_reps=20,
            seed=6,
            k=2,
            b=1.0,
        )
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_coverage_study(self):
        """Test the coverage table layout and ranges."""
        result = coverage_study(self.cfg)
        self.assertEqual(result.header, COVERAGE_HEADER)
        self.assertEqual([row[5] for row in result.rows], ['homogeneous', 'heterogeneous'])
        self.assertEqual([record['index'] for record in result.sims], [0, 1])
        for row in result.rows:
            self.assertEqual(row[:5], ['elliptical', 'normal', '2', '1', 3])
            self.assertTrue(0.0 <= row[6] <= 1.0)
            self.assertGreater(row[7], 0.0)

    def test_coverage_study_deterministic(self):
        """Test the same configuration reproduces the table."""
        self.assertEqual(coverage_study(self.cfg).rows, coverage_study(self.cfg).rows)

    def test_size_power_study(self):
        """Test the size/power table layout."""
        result = size_power_study(self.cfg)
        self.assertEqual(result.header, SIZE_POWER_HEADER)
        self.assertEqual([(row[1], row[2]) for row in result.rows], [
            ('H0', 'homogeneous'),
            ('H0', 'heterogeneous'),
            ('H1', 'homogeneous'),
            ('H1', 'heterogeneous'),
        ])
        for row in result.rows:
            self.assertIn(row[3], (0.0, 0.5, 1.0))

    def test_write_csv(self):
        """Test the CSV table format."""
        result = coverage_study(self.cfg)
        path = Path(self.tmp.name) / 'coverage.csv'
        write_study_csv(result, path)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'Mean,Error,K,B,Grid,Mode,Coverage,Average width')
        self.assertEqual(len(lines), 3)
        self.assertRegex(lines[1], r'^elliptical,normal,2,1,3,homogeneous,\d\.\d{6},\d+\.\d{6}$')

    def test_config_round_trip(self):
        """Test the task payload rebuilds the configuration."""
        self.assertEqual(StudyConfig.from_dict(self.cfg.to_dict()), self.cfg)

    def test_config_errors(self):
        """Test invalid study settings."""
        with self.assertRaises(ConfigError):
            StudyConfig(n=30, m=30, sims=0)
        with self.assertRaises(ConfigError):
            StudyConfig(n=30, m=30, modes=())
        with self.assertRaises(ConfigError):
            StudyConfig(n=30, m=30, kernel_g='cosine')


class DiscPowerTest(SimpleTestCase):
    """Test the zero-mean test detects the disc signal."""

    def test_disc_rejected(self):
        """Test the 0.3 disc of radius 0.1 is rejected in at least 80% of 50 runs."""
        cfg = StudyConfig(
            n=128,
            m=128,
            mean=MeanField(MeanFieldKind.DISC, height=0.3, radius=0.1),
            noise=NoiseKind.IID_NORMAL,
            grid_divisions=15,
            alpha=0.05,
            sims=50,
            boot_reps=100,
            modes=(BootstrapMode.HOMOGENEOUS,),
            seed=2024,
            k=12,
            b=1.0,
        )
        result = size_power_study(cfg)
        rates = {(row[1], row[2]): row[3] for row in result.rows}
        self.assertGreaterEqual(rates[(Hypothesis.ALTERNATIVE.value, BootstrapMode.HOMOGENEOUS.value)], 0.8)
        self.assertEqual(len(result.sims), 50)


class StudyConfigSerializerTest(SimpleTestCase):
    """Test study.json validation."""

    def test_defaults(self):
        """Test a minimal document gets the defaults."""
        serializer = StudyConfigSerializer(data={'n': 50, 'm': 40})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        cfg = serializer.save()
        self.assertEqual((cfg.n, cfg.m), (50, 40))
        self.assertEqual(cfg.noise, NoiseKind.AR2D)
        self.assertEqual(cfg.mean.kind, MeanFieldKind.ZERO)
        self.assertEqual(cfg.modes, (BootstrapMode.HOMOGENEOUS, BootstrapMode.HETEROGENEOUS))
        self.assertIsNone(cfg.k)

    def test_full_document(self):
        """Test nested mean and selector settings."""
        serializer = StudyConfigSerializer(data={
            'n': 100,
            'm': 100,
            'mean': {'kind': 'disc', 'height': 0.5, 'radius': 0.2},
            'noise': 'ma',
            'modes': ['heterogeneous'],
            'vb': {'q': 0.2, 'gamma': [1, 2]},
            'k': 3,
        })
        self.assertTrue(serializer.is_valid(), serializer.errors)
        cfg = serializer.save()
        self.assertEqual(cfg.mean.radius, 0.2)
        self.assertEqual(cfg.vb.gamma, (1.0, 2.0))
        self.assertEqual(cfg.modes, (BootstrapMode.HETEROGENEOUS,))
        self.assertEqual(cfg.k, 3)

    def test_invalid(self):
        """Test out-of-range values are reported."""
        for data in ({'n': 50, 'm': 50, 'alpha': 1.5}, {'n': 50, 'm': 50, 'noise': 'cauchy'}, {'m': 50}):
            serializer = StudyConfigSerializer(data=data)
            self.assertFalse(serializer.is_valid())
