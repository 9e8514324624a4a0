"""Exception hierarchy shared by every module.

Each class maps onto one CLI exit code, see cli.EXIT_*.
"""


class SoftPruneError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(SoftPruneError, ValueError):
    """A caller-supplied argument is out of its documented range."""


class OutOfRangeError(SoftPruneError, IndexError):
    """An epoch/step index fell outside the configured schedule."""


class DataCorruptionError(SoftPruneError):
    """Non-finite or malformed data was encountered where clean numbers are required."""


class NumericOverflowError(SoftPruneError, ArithmeticError):
    """A numeric computation produced a non-finite result."""
