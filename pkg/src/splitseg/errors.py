"""Exception types raised across the package."""


class SplitsegError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SplitsegError, ValueError):
    pass


class DomainError(SplitsegError, ValueError):
    """An input lies outside the domain where an operator is defined."""


class FormatError(SplitsegError, ValueError):
    """Malformed PGM input. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConvergenceError(SplitsegError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message}; final residual {residual:.3e}")
        self.residual = residual


class DegenerateFitError(SplitsegError, ValueError):
    """Order estimation failed because an error value was exactly zero."""
