"""Exception types shared across the package."""


class NBDistError(Exception):
    """Base class for all errors raised by nbdist."""


class EdgeListError(NBDistError, ValueError):
    """Malformed or inconsistent edge-list input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GenerationError(NBDistError, RuntimeError):
    """A random graph generator could not produce a valid graph."""


class NumericalError(NBDistError, ArithmeticError):
    """Eigensolver failure or integer overflow."""


class ConfigError(NBDistError, ValueError):
    """Invalid parameters or configuration."""
