"""Operator-splitting schemes, their feedforward-network form, and two
relaxed Potts-model segmentation solvers on periodic 2-D grids."""

from .errors import (
    ConvergenceError,
    DegenerateFitError,
    DomainError,
    FormatError,
    InvalidParameterError,
    SplitsegError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DegenerateFitError",
    "DomainError",
    "FormatError",
    "InvalidParameterError",
    "SplitsegError",
]
