"""Exception types shared across the package."""


class TreepercError(Exception):
    """Base class for all package errors."""


class ValidationError(TreepercError, ValueError):
    """An argument violates an operation's precondition."""


class ConvergenceError(TreepercError, RuntimeError):
    """An iterative numerical procedure failed to converge.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class BracketError(TreepercError, RuntimeError):
    """A root bracket could not be established (no sign change)."""


class ResourceLimitError(TreepercError, RuntimeError):
    """A sampler exceeded its configured memory / exploration budget."""
