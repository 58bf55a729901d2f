"""Exception types shared across the package.

The CLI maps these onto exit codes, so keep the hierarchy flat.
"""


class LocsmoothError(Exception):
    """Base class for every error raised on purpose by this package."""


class DomainError(LocsmoothError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ShapeError(LocsmoothError, ValueError):
    """Array dimensions do not agree."""


class InputError(LocsmoothError, ValueError):
    """Malformed or empty input data."""


class ConfigError(LocsmoothError, ValueError):
    """Inconsistent configuration or violated problem contract."""


class InvalidStatsError(LocsmoothError, ValueError):
    """Smoothed statistics that no distribution could have produced."""


class CapacityError(LocsmoothError, RuntimeError):
    """A problem is too large for an exact method."""


class OracleViolation(LocsmoothError, AssertionError):
    """A certified bound exceeded brute-force ground truth."""
