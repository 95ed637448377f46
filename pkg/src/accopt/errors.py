"""Shared exception types for the toolkit."""


class AccoptError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(AccoptError, ValueError):
    """Raised when arguments violate a documented precondition."""


class UnsupportedCombinationError(AccoptError):
    """Raised for (geometry, feasible-set) or oracle combinations with no
    implemented closed form."""


class DivergedError(AccoptError):
    """Raised when iterates become non-finite."""

    def __init__(self, msg, iterate=None, iteration=None):
        super().__init__(msg)
        self.iterate = iterate
        self.iteration = iteration


class NotConvergedError(AccoptError):
    """Raised when an iteration cap is hit before the stopping test fires.

    Carries the final residuals so callers can report partial progress.
    """

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals or {}


class LineSearchError(AccoptError):
    """Raised when a backtracking/doubling line search exceeds its cap."""


class OracleError(AccoptError):
    """Raised when an oracle returns malformed output (NaN, wrong shape)."""
