"""
Exception hierarchy shared by every fieldinfer app.

Each family carries the process exit code the management commands use
when the error escapes a command: 2 for usage/config, 3 for data, 4 for
numeric failures.
"""


class FieldInferError(Exception):
    """Base class for all fieldinfer errors."""
    exit_code = 3


class ConfigError(FieldInferError):
    """Invalid configuration or command arguments."""
    exit_code = 2


class BandwidthTooLargeError(ConfigError):
    """The smoothing bandwidth leaves no admissible interior lattice."""


class BlockTooSmallError(ConfigError):
    """A variance-bandwidth block cannot host the smoothing window."""


class DataError(FieldInferError):
    """Problems with input data."""
    exit_code = 3


class FormatError(DataError):
    """CSV grid is not rectangular."""


class ParseError(DataError):
    """A CSV cell could not be read as a finite real number."""

    def __init__(self, row, col, value):
        """
        Args:
            row: 1-based row of the offending cell
            col: 1-based column of the offending cell
            value: the raw cell text
        """
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"cannot parse {value!r} at row {row}, column {col}")


class EmptyError(DataError):
    """CSV grid has no rows."""


class GridIOError(DataError):
    """Reading or writing a grid file failed."""


class BoundaryError(DataError):
    """Positions or windows leave the admissible lattice."""

    def __init__(self, message, positions=()):
        self.positions = list(positions)
        super().__init__(message)


class NumericError(FieldInferError):
    """Numerical failures."""
    exit_code = 4


class SizeError(NumericError):
    """Problem size exceeds a configured cap."""


class ShapeError(NumericError):
    """Operand dimensions do not conform."""
