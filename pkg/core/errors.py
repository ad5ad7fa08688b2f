# core/errors.py


class QuantrixError(Exception):
    """Base class for every error raised by the quantrix core."""


class ValidationError(QuantrixError, ValueError):
    """An input violates a structural invariant (weights, shapes, ranges)."""


class DomainError(QuantrixError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedModelError(QuantrixError):
    """The operation needs finite-support or bounded rewards and got something else."""


class NumericError(QuantrixError, ArithmeticError):
    """A numerical routine could not produce a result (e.g. no root bracket)."""


class NonConvergenceError(QuantrixError):
    """An iterative solver hit its iteration cap. Carries the last iterate."""

    def __init__(self, message: str, table=None, iters: int = 0):
        super().__init__(message)
        self.table = table
        self.iters = iters


class ConfigError(QuantrixError):
    """An experiment config could not be parsed or validated."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
