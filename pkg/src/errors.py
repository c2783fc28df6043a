"""
Exception hierarchy.

Every error subclasses the builtin it refines so callers that only know
ValueError / RuntimeError keep working.
"""

from typing import Optional


class FraudMixError(Exception):
    """Base class for every error raised by this package."""


class DatasetError(FraudMixError, ValueError):
    """Malformed or unusable transaction data. Carries the offending location when known."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class DimensionMismatchError(FraudMixError, ValueError):
    pass


class HyperparameterError(FraudMixError, ValueError):
    pass


class ConfigError(FraudMixError, ValueError):
    pass


class OptimizationError(FraudMixError, RuntimeError):
    """An optimizer produced non-finite parameters or loss values."""
