"""
Tests for grid app.
"""
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.grid.exceptions import (
    BandwidthTooLargeError,
    BoundaryError,
    EmptyError,
    FormatError,
    GridIOError,
    ParseError,
)
from apps.grid.services import (
    Field,
    Position,
    PositionGrid,
    load_grid_csv,
    make_position_grid,
    save_grid_csv,
    validate_positions,
)
from apps.grid.streams import derive_seed, stream


class GridCsvTest(SimpleTestCase):
    """Test CSV grid I/O."""

    def setUp(self):
        """Set up test data."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_load_small_grid(self):
        """Test reading a 2x2 grid."""
        field = load_grid_csv(self.write('a.csv', '1,2\n3,4'))
        self.assertEqual((field.n, field.m), (2, 2))
        np.testing.assert_array_equal(field.values, [[1, 2], [3, 4]])
        self.assertEqual(field.at(2, 1), 3.0)

    def test_ragged_rows(self):
        """Test that ragged rows raise FormatError."""
        with self.assertRaises(FormatError):
            load_grid_csv(self.write('ragged.csv', '1,2,3\n4,5\n'))

    def test_non_numeric_cell(self):
        """Test that a non-numeric cell reports its row and column."""
        with self.assertRaises(ParseError) as ctx:
            load_grid_csv(self.write('bad.csv', '1,2\n3,abc\n'))
        self.assertEqual((ctx.exception.row, ctx.exception.col), (2, 2))

    def test_non_finite_cell(self):
        """Test that nan cells are rejected."""
        with self.assertRaises(ParseError):
            load_grid_csv(self.write('nan.csv', '1,nan\n'))

    def test_empty_file(self):
        """Test that an empty file raises EmptyError."""
        with self.assertRaises(EmptyError):
            load_grid_csv(self.write('empty.csv', ''))

    def test_missing_file(self):
        """Test that a missing file raises GridIOError."""
        with self.assertRaises(GridIOError):
            load_grid_csv(self.dir / 'nope.csv')

    def test_save_single_zero(self):
        """Test the text written for a 1x1 zero field."""
        path = self.dir / 'zero.csv'
        save_grid_csv(Field([[0.0]]), path)
        self.assertEqual(path.read_text(), '0\n')

    def test_round_trip_random_field(self):
        """Test that save then load is the identity."""
        values = np.random.default_rng(7).standard_normal((10, 10)) * 1e3
        path = self.dir / 'rt.csv'
        save_grid_csv(Field(values), path)
        loaded = load_grid_csv(path)
        self.assertEqual(np.max(np.abs(loaded.values - values)), 0.0)
        self.assertEqual(loaded, Field(values))

    def test_save_unwritable(self):
        """Test that writing into a missing directory raises GridIOError."""
        with self.assertRaises(GridIOError):
            save_grid_csv(Field([[1.0]]), self.dir / 'missing' / 'x.csv')

    def test_field_is_read_only(self):
        """Test that field values cannot be modified."""
        field = Field([[1.0, 2.0]])
        with self.assertRaises(ValueError):
            field.values[0, 0] = 5.0


class PositionGridTest(SimpleTestCase):
    """Test position grids and interiority validation."""

    def test_default_study_grid(self):
        """Test the 20x20 grid on a 200x200 field with K=10."""
        grid = make_position_grid(200, 200, 10, 20)
        self.assertEqual(grid.V, 400)
        p, q = grid.anchors()
        self.assertTrue(np.all((p >= 21) & (p <= 180)))
        self.assertTrue(np.all((q >= 21) & (q <= 180)))
        self.assertEqual(p.min(), 21)
        self.assertEqual(p.max(), 180)

    def test_single_center_position(self):
        """Test gv=1 gives one centered position."""
        grid = make_position_grid(200, 120, 10, 1)
        self.assertEqual(grid.V, 1)
        pos = grid[0]
        self.assertEqual(pos.p, int(np.floor(200 * pos.x)))
        self.assertTrue(21 <= pos.p <= 180)
        self.assertTrue(21 <= pos.q <= 100)

    def test_bandwidth_too_large(self):
        """Test that 4K+2 > n is rejected."""
        with self.assertRaises(BandwidthTooLargeError):
            make_position_grid(50, 50, 13, 5)

    def test_boundary_equalities(self):
        """Test the edges of the admissible range."""
        ok = PositionGrid([Position(0.105, 0.5, 21, 100), Position(0.9, 0.5, 180, 100)])
        validate_positions(ok, 200, 200, 10)
        bad = PositionGrid([Position(0.1, 0.5, 20, 100)])
        with self.assertRaises(BoundaryError) as ctx:
            validate_positions(bad, 200, 200, 10)
        self.assertEqual(ctx.exception.positions[0].p, 20)

    def test_validation_matches_inequalities(self):
        """Test validation against the double inequalities on random cases."""
        rng = np.random.default_rng(11)
        for _ in range(500):
            n, m = rng.integers(1, 80, size=2)
            k = int(rng.integers(0, 15))
            p, q = int(rng.integers(0, n + 1)), int(rng.integers(0, m + 1))
            expected = 2 * k + 1 <= p <= n - 2 * k and 2 * k + 1 <= q <= m - 2 * k
            grid = PositionGrid([Position(p / n, q / m, p, q)])
            try:
                validate_positions(grid, int(n), int(m), k)
                accepted = True
            except BoundaryError:
                accepted = False
            self.assertEqual(accepted, expected)

    def test_anchor_maps_back(self):
        """Test that x = p/n maps back to anchor p."""
        for n in (7, 128, 200, 333):
            for p in range(1, n + 1):
                self.assertEqual(Position.at(p / n, 0.5, n, 10).p, p)


class StreamTest(SimpleTestCase):
    """Test keyed random streams."""

    def test_same_key_same_draws(self):
        """Test that a key always yields the same draws."""
        a = stream(42, 1, 7).standard_normal(5)
        b = stream(42, 1, 7).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_different_keys_differ(self):
        """Test that neighbouring keys give different draws."""
        a = stream(42, 1, 7).standard_normal(5)
        b = stream(42, 1, 8).standard_normal(5)
        self.assertFalse(np.array_equal(a, b))

    def test_derived_seed_is_stable(self):
        """Test that derived seeds are deterministic."""
        self.assertEqual(derive_seed(3, 4, 5), derive_seed(3, 4, 5))
