"""Accelerated optimization with inexact, stochastic and gradient-free
oracles, plus primal-dual solvers for linearly constrained problems."""

from .errors import (
    AccoptError,
    DivergedError,
    InvalidInputError,
    LineSearchError,
    NotConvergedError,
    OracleError,
    UnsupportedCombinationError,
)

__version__ = "0.1.0"

__all__ = [
    "AccoptError",
    "DivergedError",
    "InvalidInputError",
    "LineSearchError",
    "NotConvergedError",
    "OracleError",
    "UnsupportedCombinationError",
    "__version__",
]
