"""Exception hierarchy and process exit codes.

Errors fall into three CLI-visible buckets: bad input data (exit 1),
numerical failures on valid-looking data (exit 2), and bad configuration
(exit 3).
"""


class TaplabError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TaplabError):
    """Malformed or unreadable input data."""


class ParseError(InputError):
    """Stream could not be parsed; message names the first bad record."""


class SchemaError(InputError):
    """Parsed record violates the landmark schema (e.g. wrong point count)."""


class NoLabelError(InputError):
    """A consensus label was requested but no rater scores exist."""


class NumericalError(TaplabError):
    """Computation failed on structurally valid input."""


class DegenerateGeometryError(NumericalError):
    """Landmark geometry makes a signal undefined (zero palm length etc.)."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class InsufficientCyclesError(NumericalError):
    """Too few tapping cycles detected for the requested feature."""


class DegenerateCyclesError(NumericalError):
    """Cycle statistics have a zero denominator (e.g. zero mean amplitude)."""


class DegenerateTrainingError(NumericalError):
    """Training table cannot support fitting (e.g. single-class labels)."""


class DegenerateColumnError(NumericalError):
    """A feature column has zero variance; message names the column."""

    def __init__(self, column):
        super().__init__(f"column {column!r} has zero variance")
        self.column = column


class UndefinedAlphaError(NumericalError):
    """Krippendorff's alpha is undefined (no co-rated items)."""


class ConfigurationError(TaplabError):
    """Invalid parameters, paths, or option combinations."""


EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3


def exit_code_for(exc):
    """Map an exception to the documented CLI exit code."""
    if isinstance(exc, InputError):
        return EXIT_INPUT
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    raise TypeError(f"not a taplab error: {exc!r}")
