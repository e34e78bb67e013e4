"""
Exceptions raised across ldtsp. The CLI maps them to exit codes.
"""


class LdtspError(Exception):
    """Base class for every error raised by ldtsp."""


class InstanceError(LdtspError, ValueError):
    """An instance, node set or mass list violates its invariants."""


class InstanceFormatError(InstanceError):
    """A TSPLIB or native instance document could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EnergyModelError(LdtspError, ValueError):
    """Power model or heading profile inputs are out of range."""


class ModelError(LdtspError, ValueError):
    """A linear model, constraint, tour or cut request is malformed."""


class SolverError(LdtspError):
    """The solver was asked to do something it does not support."""


class OracleGuardError(LdtspError, ValueError):
    """An exact oracle was called on an instance beyond its size guard."""
