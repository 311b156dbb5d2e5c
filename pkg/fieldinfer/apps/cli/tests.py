"""
Tests for cli app.
"""
import hashlib
import json
import tempfile
from datetime import timedelta
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase, override_settings

from apps.bandwidth.serializers import BandwidthSelectionSerializer
from apps.bootstrap.serializers import VerdictSerializer, load_result
from apps.cli.factories import RunManifestFactory
from apps.cli.models import CommandName, RunManifest
from apps.cli.serializers import RunManifestSerializer
from apps.grid.services import load_grid_csv
from apps.kernels.services import QUARTIC
from apps.simulate.studies import COVERAGE_HEADER
from apps.smoother.services import SmootherConfig, nw_surface


class CommandTestMixin:
    """Temporary directory and command helpers."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.grid = self.path('grid.csv')
        self.call(
            'simulate', '--mean', 'elliptical', '--noise', 'normal',
            '-n', '40', '-m', '40', '--seed', '3', '-o', self.grid,
        )

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return str(self.dir / name)

    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue()

    def call_streams(self, *args):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        return out.getvalue(), err.getvalue()

    def ci_args(self, output, *extra):
        return (
            '--input', self.grid, '--k', '2', '--b', '1', '--grid-divisions', '3',
            '--reps', '30', '--seed', '5', '--alpha', '0.1', '-o', output, *extra,
        )


class SimulateCommandTest(CommandTestMixin, TestCase):
    """Test the simulate command."""

    def test_writes_grid_and_manifest(self):
        """Test the grid, its manifest file and the manifest row."""
        field = load_grid_csv(self.grid)
        self.assertEqual(field.shape, (40, 40))
        manifest = json.loads(Path(self.grid + '.manifest.json').read_text())
        self.assertEqual(manifest['command'], 'simulate')
        self.assertEqual(manifest['seeds'], {'seed': 3})
        self.assertEqual(manifest['config']['mean'], 'elliptical')
        self.assertIn('numpy', manifest['versions'])
        self.assertEqual(RunManifest.objects.filter(command=CommandName.SIMULATE).count(), 1)

    def test_deterministic(self):
        """Test identical arguments give identical bytes."""
        again = self.path('again.csv')
        self.call(
            'simulate', '--mean', 'elliptical', '--noise', 'normal',
            '-n', '40', '-m', '40', '--seed', '3', '-o', again,
        )
        self.assertEqual(Path(again).read_bytes(), Path(self.grid).read_bytes())

    def test_zero_noise(self):
        """Test --noise-scale 0 writes the mean lattice."""
        zeros = self.path('zeros.csv')
        self.call('simulate', '--mean', 'zero', '-n', '12', '-m', '10', '--noise-scale', '0', '-o', zeros)
        np.testing.assert_array_equal(load_grid_csv(zeros).values, np.zeros((12, 10)))


class EstimateCommandTest(CommandTestMixin, TestCase):
    """Test the estimate command."""

    def test_matches_library(self):
        """Test the written surface equals nw_surface."""
        output = self.path('surface.csv')
        self.call('estimate', '--input', self.grid, '--k', '2', '-o', output)
        expected = nw_surface(load_grid_csv(self.grid), SmootherConfig(2, QUARTIC)).values
        np.testing.assert_array_equal(np.loadtxt(output, delimiter=','), expected)
        self.assertFalse(RunManifest.objects.get(command=CommandName.ESTIMATE).auto_bandwidth)

    def test_constant_input(self):
        """Test a constant grid gives a constant surface."""
        constant = self.path('constant.csv')
        np.savetxt(constant, np.full((20, 20), 2.5), delimiter=',')
        output = self.path('surface.csv')
        self.call('estimate', '--input', constant, '--k', '3', '-o', output)
        surface = np.loadtxt(output, delimiter=',')
        self.assertEqual(surface.shape, (14, 14))
        np.testing.assert_allclose(surface, 2.5, rtol=0, atol=1e-12)

    def test_cross_validation(self):
        """Test omitting --k selects it and records the selection."""
        output = self.path('surface.csv')
        self.call('estimate', '--input', self.grid, '--k-max', '3', '-o', output)
        manifest = RunManifest.objects.get(command=CommandName.ESTIMATE)
        self.assertTrue(manifest.auto_bandwidth)
        self.assertIn(manifest.config['k'], (1, 2, 3))

    def test_stdout(self):
        """Test the surface goes to stdout without --output."""
        out = self.call('estimate', '--input', self.grid, '--k', '2')
        self.assertEqual(len(out.splitlines()), 36)

    def test_stdout_manifest_on_stderr(self):
        """Test a stdout run writes its manifest JSON to stderr."""
        out, err = self.call_streams('estimate', '--input', self.grid, '--k', '2')
        self.assertEqual(len(out.splitlines()), 36)
        manifest = json.loads(err)
        self.assertEqual(manifest['command'], 'estimate')
        self.assertEqual(manifest['config']['k'], 2)
        self.assertIn(self.grid, manifest['input_checksums'])
        self.assertEqual(list(self.dir.glob('*.manifest.json')), [Path(self.grid + '.manifest.json')])

    def test_manifest_option(self):
        """Test --manifest names the manifest file of a stdout run."""
        manifest_file = self.path('estimate.json')
        _, err = self.call_streams('estimate', '--input', self.grid, '--k', '2', '--manifest', manifest_file)
        self.assertEqual(err, '')
        manifest = json.loads(Path(manifest_file).read_text())
        self.assertEqual(manifest['command'], 'estimate')
        self.assertEqual(manifest['output_path'], '')

    def test_missing_input(self):
        """Test a missing input exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('estimate', '--input', self.path('absent.csv'), '--k', '2')
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('input not found', str(ctx.exception))

    def test_bad_grid(self):
        """Test an unparsable grid exits with code 3."""
        bad = self.path('bad.csv')
        Path(bad).write_text('1,2\n3,x\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('estimate', '--input', bad, '--k', '1')
        self.assertEqual(ctx.exception.returncode, 3)

    def test_bandwidth_too_large(self):
        """Test a window wider than the field exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('estimate', '--input', self.grid, '--k', '25')
        self.assertEqual(ctx.exception.returncode, 2)


class CiCommandTest(CommandTestMixin, TestCase):
    """Test the ci command."""

    def test_result_validates(self):
        """Test the result document validates and records fixed bandwidths."""
        output = self.path('ci.json')
        self.call('ci', *self.ci_args(output))
        data = load_result(output)
        self.assertEqual(data['schema'], 'lwmb-result/1')
        self.assertEqual(len(data['positions']), 9)
        self.assertEqual((data['k'], data['b'], data['reps']), (2, 1.0, 30))
        manifest = RunManifest.objects.get(command=CommandName.CI)
        self.assertFalse(manifest.auto_bandwidth)
        self.assertEqual(manifest.input_checksums[self.grid], hashlib.sha256(Path(self.grid).read_bytes()).hexdigest())

    def test_byte_identical_across_threads(self):
        """Test reruns with 1 and 8 threads write the same bytes."""
        first, second = self.path('one.json'), self.path('eight.json')
        self.call('ci', *self.ci_args(first, '--threads', '1'))
        self.call('ci', *self.ci_args(second, '--threads', '8'))
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())

    def test_heterogeneous(self):
        """Test heterogeneous mode reports the local standard deviations."""
        output = self.path('ci.json')
        self.call('ci', *self.ci_args(output, '--mode', 'heterogeneous'))
        data = load_result(output)
        self.assertEqual(data['mode'], 'heterogeneous')
        self.assertEqual(len(data['sigma']), 9)

    def test_alpha_out_of_range(self):
        """Test alpha outside (0, 1) exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('ci', *self.ci_args(self.path('ci.json'), '--alpha', '1.5'))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('alpha out of range', str(ctx.exception))

    def test_bad_threads(self):
        """Test a zero thread count exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('ci', *self.ci_args(self.path('ci.json'), '--threads', '0'))
        self.assertEqual(ctx.exception.returncode, 2)


class TestMeanCommandTest(CommandTestMixin, TestCase):
    """Test the test command."""

    def verdict(self, *extra):
        output = self.path('verdict.json')
        self.call('test_mean', *self.ci_args(output, *extra))
        serializer = VerdictSerializer(data=json.loads(Path(output).read_text()))
        self.assertTrue(serializer.is_valid(), serializer.errors)
        return serializer.validated_data

    def test_null_is_estimate(self):
        """Test the estimate itself as the null is not rejected."""
        ci = self.path('ci.json')
        self.call('ci', *self.ci_args(ci))
        estimates = load_result(ci)['estimates']
        null = self.path('null.csv')
        np.savetxt(null, np.array([estimates]), delimiter=',', fmt='%.17g')
        verdict = self.verdict('--null', null)
        self.assertEqual(verdict['statistic'], 0.0)
        self.assertFalse(verdict['reject'])
        self.assertEqual(verdict['flagged'], [])

    def test_zero_field(self):
        """Test a zero field against the zero null gives statistic 0."""
        self.grid = self.path('zeros.csv')
        self.call('simulate', '--mean', 'zero', '-n', '30', '-m', '30', '--noise-scale', '0', '-o', self.grid)
        verdict = self.verdict('--null', 'zero')
        self.assertEqual(verdict['statistic'], 0.0)
        self.assertFalse(verdict['reject'])

    def test_strong_signal_rejected(self):
        """Test a large constant mean is rejected against zero."""
        self.grid = self.path('shifted.csv')
        np.savetxt(self.grid, 50.0 + np.random.default_rng(1).standard_normal((40, 40)), delimiter=',')
        verdict = self.verdict()
        self.assertTrue(verdict['reject'])
        self.assertEqual(len(verdict['flagged']), 9)
        self.assertEqual(len(verdict['flagged_positions']), 9)
        self.assertEqual(set(verdict['flagged_positions'][0]), {'x', 'y', 'p', 'q'})

    def test_non_conformable_null(self):
        """Test a null grid of the wrong shape exits with code 2."""
        null = self.path('null.csv')
        np.savetxt(null, np.zeros((2, 3)), delimiter=',')
        with self.assertRaises(CommandError) as ctx:
            self.call('test_mean', *self.ci_args(self.path('verdict.json'), '--null', null))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_null(self):
        """Test a missing null file exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('test_mean', *self.ci_args(self.path('verdict.json'), '--null', self.path('absent.csv')))
        self.assertEqual(ctx.exception.returncode, 2)


class SelectBandwidthCommandTest(CommandTestMixin, TestCase):
    """Test the select-bandwidth command."""

    def args(self, output, threads):
        return (
            'select_bandwidth', '--input', self.grid, '--k-max', '3', '--q', '0.5', '--gamma', '1..3',
            '--iterations', '2', '--reps', '10', '--seed', '4', '--threads', threads, '-o', output,
        )

    def test_document(self):
        """Test the selection document validates and is thread independent."""
        first, second = self.path('one.json'), self.path('four.json')
        self.call(*self.args(first, '1'))
        self.call(*self.args(second, '4'))
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
        data = json.loads(Path(first).read_text())
        serializer = BandwidthSelectionSerializer(data=data)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(sorted(data['vb_losses']), ['1.0', '2.0', '3.0'])
        self.assertEqual(sorted(data['cv_scores']), ['1', '2', '3'])


class StudyCommandTest(CommandTestMixin, TestCase):
    """Test the study command."""

    def write_config(self, **overrides):
        config = {
            'n': 30, 'm': 30, 'mean': {'kind': 'elliptical'}, 'noise': 'normal', 'grid_divisions': 3,
            'alpha': 0.1, 'sims': 2, 'boot_reps': 10, 'seed': 1, 'k': 2, 'b': 1.0,
        }
        config.update(overrides)
        path = self.path('study.json')
        Path(path).write_text(json.dumps(config))
        return path

    def test_coverage_table(self):
        """Test the coverage CSV and the study manifest."""
        output = self.path('coverage.csv')
        self.call('study', 'coverage', '--config', self.write_config(), '-o', output)
        lines = Path(output).read_text().splitlines()
        self.assertEqual(lines[0], ','.join(COVERAGE_HEADER))
        self.assertEqual(len(lines), 3)
        manifest = RunManifest.objects.get(command=CommandName.STUDY)
        self.assertEqual(len(manifest.config['sims']), 2)
        self.assertFalse(manifest.auto_bandwidth)

    def test_size_power_table(self):
        """Test the size/power CSV has one row per hypothesis and mode."""
        output = self.path('sizepower.csv')
        self.call('study', 'sizepower', '--config', self.write_config(modes=['homogeneous']), '-o', output)
        lines = Path(output).read_text().splitlines()
        self.assertEqual(lines[0], 'Noise,Hypothesis,Mode,Rejection rate')
        self.assertEqual([line.split(',')[1] for line in lines[1:]], ['H0', 'H1'])

    def test_invalid_config(self):
        """Test an invalid study.json exits with code 2."""
        with self.assertRaises(CommandError) as ctx:
            self.call('study', 'coverage', '--config', self.write_config(alpha=2.0), '-o', self.path('out.csv'))
        self.assertEqual(ctx.exception.returncode, 2)


class RunManifestTest(TestCase):
    """Test RunManifest rows and their serializer."""

    def setUp(self):
        """Set up test data."""
        self.manifest = RunManifestFactory()

    def test_manifest_path(self):
        """Test the manifest sits next to the output."""
        self.assertEqual(self.manifest.manifest_path, f"{self.manifest.output_path}.manifest.json")
        self.assertIsNone(RunManifestFactory(output_path='').manifest_path)

    def test_serializer(self):
        """Test serialized fields."""
        data = RunManifestSerializer(self.manifest).data
        self.assertEqual(data['command'], 'ci')
        self.assertEqual(data['command_display'], 'Simultaneous confidence region')
        self.assertEqual(data['config']['k'], 10)

    def test_ordering(self):
        """Test newest manifests come first."""
        newer = RunManifestFactory(created_at=self.manifest.created_at + timedelta(seconds=1))
        self.assertEqual(RunManifest.objects.first(), newer)

    @override_settings(FIELDINFER_RECORD_RUNS=False)
    def test_recording_disabled(self):
        """Test disabling the database record still writes the file."""
        with tempfile.TemporaryDirectory() as tmp:
            output = str(Path(tmp) / 'grid.csv')
            call_command('simulate', '-n', '10', '-m', '10', '-o', output, stdout=StringIO())
            self.assertTrue(Path(output + '.manifest.json').is_file())
        self.assertEqual(RunManifest.objects.filter(command=CommandName.SIMULATE).count(), 0)
