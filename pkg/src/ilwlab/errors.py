"""Exception hierarchy shared by every ilwlab module."""


class IlwlabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(IlwlabError, ValueError):
    """Invalid parameters (grid sizes, depths, unknown keys, ...)."""


class ShapeError(IlwlabError, ValueError):
    """Array length or grid mismatch."""


class PreconditionError(IlwlabError, ValueError):
    """An input violates a documented precondition (e.g. nonzero mean)."""


class RangeError(IlwlabError, ValueError):
    """A requested time or index lies outside the available data."""


class DivergenceError(IlwlabError, ArithmeticError):
    """Raised when a time integration produces NaN or oversized coefficients."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class InternalConsistencyError(IlwlabError, RuntimeError):
    """A guard that must never trigger did trigger."""


class FormatError(IlwlabError, ValueError):
    """A serialized report is truncated, malformed or of the wrong version."""
