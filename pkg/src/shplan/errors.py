"""Exception types shared across the package."""


class ShplanError(Exception):
    """Base class for package errors."""


class InputError(ShplanError):
    """Bad user input: malformed files, dangling references, invalid config."""


class ModelError(ShplanError):
    """A model was assembled inconsistently (mismatched shapes, bad senses)."""


class SolverNumericsError(ShplanError):
    """The solver stalled or lost numerical consistency.

    Carries the iteration log so failures are debuggable rather than silent.
    """

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = list(log) if log else []
