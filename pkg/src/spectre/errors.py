"""Exception hierarchy.

Parameter and data problems map to CLI exit code 2, numeric failures to 3.
"""

from __future__ import annotations


class SpectreError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ParameterError(SpectreError, ValueError):
    """An argument is out of its admissible range."""

    exit_code = 2


class DataError(SpectreError, ValueError):
    """Input data is malformed (non-finite values, bad file layout, ...)."""

    exit_code = 2


class NumericError(SpectreError, ArithmeticError):
    """A numerical routine failed."""


class IllConditionedError(NumericError):
    """A matrix that must be positive definite is (numerically) singular."""


class InsufficientDataError(NumericError):
    """A filter loop left fewer samples than the dimension requires."""


class DegenerateDataError(NumericError):
    """All samples coincide, so no direction can be estimated."""


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration limit.

    The best iterate seen so far is kept on ``best`` so callers can decide
    whether it is good enough.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
