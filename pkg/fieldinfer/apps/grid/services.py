"""
Field representation, CSV grid I/O and position validation.

Logical lattice indices are 1-based: X_i^(j) lives at values[i - 1, j - 1].
That offset is applied here and in the window helpers of the smoother app,
nowhere else.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from apps.grid.exceptions import (
    BandwidthTooLargeError,
    BoundaryError,
    ConfigError,
    EmptyError,
    FormatError,
    GridIOError,
    ParseError,
    ShapeError,
)

logger = logging.getLogger(__name__)

# Tolerance, in lattice units, when mapping a coordinate back to its anchor.
ANCHOR_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Field:
    """
    Observed random field on an n x m lattice.

    Attributes:
        values: read-only n x m float64 array, values[i-1, j-1] = X_i^(j)
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeError(f"field must be a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParseError(*_first_non_finite(values))
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def at(self, i, j):
        """Value X_i^(j) at 1-based lattice indices."""
        return float(self.values[i - 1, j - 1])

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


def _first_non_finite(values):
    i, j = np.argwhere(~np.isfinite(values))[0]
    return int(i) + 1, int(j) + 1, repr(float(values[i, j]))


@dataclass(frozen=True)
class Position:
    """
    Target location of the mean field.

    Attributes:
        x: row coordinate in [0, 1]
        y: column coordinate in [0, 1]
        p: row anchor floor(n * x)
        q: column anchor floor(m * y)
    """
    x: float
    y: float
    p: int
    q: int

    @classmethod
    def at(cls, x, y, n, m):
        """Build a position from coordinates on an n x m lattice."""
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise ConfigError(f"position ({x}, {y}) is outside [0, 1]^2")
        p = math.floor(n * x + ANCHOR_TOLERANCE)
        q = math.floor(m * y + ANCHOR_TOLERANCE)
        return cls(x=float(x), y=float(y), p=int(p), q=int(q))


@dataclass(frozen=True)
class PositionGrid:
    """
    Ordered set of V target positions.

    Attributes:
        positions: tuple of Position
    """
    positions: tuple

    def __post_init__(self):
        object.__setattr__(self, 'positions', tuple(self.positions))
        if not self.positions:
            raise ConfigError("a position grid needs at least one position")

    @property
    def V(self):
        return len(self.positions)

    def __len__(self):
        return len(self.positions)

    def __iter__(self):
        return iter(self.positions)

    def __getitem__(self, index):
        return self.positions[index]

    def anchors(self):
        """Return the integer anchors as two int arrays (p, q)."""
        p = np.fromiter((pos.p for pos in self.positions), dtype=np.int64, count=self.V)
        q = np.fromiter((pos.q for pos in self.positions), dtype=np.int64, count=self.V)
        return p, q

    def coordinates(self):
        """Return the coordinates as two float arrays (x, y)."""
        x = np.fromiter((pos.x for pos in self.positions), dtype=np.float64, count=self.V)
        y = np.fromiter((pos.y for pos in self.positions), dtype=np.float64, count=self.V)
        return x, y

    @classmethod
    def from_coordinates(cls, coordinates, n, m):
        """Build a grid from (x, y) pairs on an n x m lattice."""
        return cls(tuple(Position.at(x, y, n, m) for x, y in coordinates))


def load_grid_csv(path):
    """
    Read a headerless comma-separated grid.

    Args:
        path: CSV file, row r column c holding X_r^(c)

    Returns:
        Field
    """
    path = Path(path)
    try:
        with path.open(newline='') as handle:
            rows = [row for row in csv.reader(handle) if row]
    except OSError as e:
        raise GridIOError(f"cannot read grid {path}: {e}") from e

    if not rows:
        raise EmptyError(f"grid {path} is empty")

    width = len(rows[0])
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise FormatError(f"grid {path}: row {r} has {len(row)} cells, expected {width}")

    values = np.empty((len(rows), width), dtype=np.float64)
    for r, row in enumerate(rows, start=1):
        for c, cell in enumerate(row, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(r, c, cell) from None
            if not math.isfinite(value):
                raise ParseError(r, c, cell)
            values[r - 1, c - 1] = value

    logger.debug(f"Loaded {values.shape[0]}x{values.shape[1]} grid from {path}")
    return Field(values)


def save_grid_csv(field, path):
    """
    Write a field as a headerless CSV with 17 significant digits.

    Args:
        field: Field (or anything with a 2-D ``values`` array)
        path: destination file
    """
    path = Path(path)
    try:
        np.savetxt(path, np.asarray(field.values), delimiter=',', fmt='%.17g')
    except OSError as e:
        raise GridIOError(f"cannot write grid {path}: {e}") from e
    logger.debug(f"Wrote {field.values.shape[0]}x{field.values.shape[1]} grid to {path}")


def interior_range(size, k):
    """Admissible anchor range [2k+1, size-2k] for one axis."""
    return 2 * k + 1, size - 2 * k


def make_position_grid(n, m, k, gv):
    """
    Equally spaced gv x gv positions over the admissible interior.

    Args:
        n: row count
        m: column count
        k: smoothing bandwidth
        gv: grid divisions per axis

    Returns:
        PositionGrid in row-major order (x outer, y inner)
    """
    if gv < 1:
        raise ConfigError(f"grid divisions must be >= 1, got {gv}")
    if n < 4 * k + 2 or m < 4 * k + 2:
        raise BandwidthTooLargeError(
            f"bandwidth K={k} leaves no interior on a {n}x{m} field (needs at least {4 * k + 2} per side)"
        )

    def axis(size):
        lo, hi = interior_range(size, k)
        if gv == 1:
            return np.array([(lo + hi) / (2.0 * size)])
        return np.linspace(lo / size, hi / size, gv)

    xs, ys = axis(n), axis(m)
    grid = PositionGrid(tuple(Position.at(x, y, n, m) for x in xs for y in ys))
    validate_positions(grid, n, m, k)
    return grid


def validate_positions(positions, n, m, k):
    """
    Check 2k+1 <= p <= n-2k and 2k+1 <= q <= m-2k for every position.

    Raises:
        BoundaryError: listing every offending position
    """
    row_lo, row_hi = interior_range(n, k)
    col_lo, col_hi = interior_range(m, k)
    offending = [
        pos for pos in positions
        if not (row_lo <= pos.p <= row_hi and col_lo <= pos.q <= col_hi)
    ]
    if offending:
        listed = ', '.join(f"(p={pos.p}, q={pos.q})" for pos in offending[:10])
        more = f" and {len(offending) - 10} more" if len(offending) > 10 else ''
        raise BoundaryError(
            f"{len(offending)} position(s) outside [{row_lo}, {row_hi}] x [{col_lo}, {col_hi}]: {listed}{more}",
            positions=offending,
        )
