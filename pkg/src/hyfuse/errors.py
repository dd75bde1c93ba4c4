"""Exception hierarchy shared across the package.

Three families map onto the CLI exit codes: configuration problems (exit 1),
data problems (exit 2), and numerical aborts (exit 3).
"""


class HyfuseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HyfuseError):
    """Invalid configuration: bad spec fields, inconsistent flags, bad shapes."""


class DataError(HyfuseError):
    """Invalid or inconsistent data: files, labels, alignment, splits."""


class NumericalError(HyfuseError):
    """Numerical failure: domain violations, degeneracy, non-finite values."""


# --- geometry ---

class InvalidInputError(NumericalError):
    """Non-finite values fed to a geometric map."""


class BallDomainError(NumericalError):
    """A point that should lie inside the unit ball has norm >= 1."""


class DegenerateDenominatorError(NumericalError):
    """Moebius addition denominator collapsed below the safe threshold."""


# --- autodiff ---

class ShapeError(ConfigError):
    """Operands with incompatible shapes."""


class InvalidLabelError(DataError):
    """A class label outside the valid index range."""


class StaleTapeError(HyfuseError):
    """backward() called on a graph that has already been consumed."""


# --- data io ---

class BadMagicError(DataError):
    """Embedding file does not start with the expected magic bytes."""


class DimMismatchError(DataError):
    """Embedding file dimension disagrees with the expected dimension."""


class TruncatedFileError(DataError):
    """Embedding file ends before the declared payload is complete."""


class NonFiniteValueError(DataError):
    """Embedding file contains NaN or infinite vector entries."""


class AlignmentError(DataError):
    """Two embedding sets cannot be paired sample-by-sample."""


class StratificationError(DataError):
    """Fold assignment impossible under the stratification constraints."""


class NumericalAbortError(NumericalError):
    """Training produced a non-finite loss and was aborted."""
