"""Exception types shared across the package."""


class BayesRegError(Exception):
    """Base class for all package errors."""


class DataError(BayesRegError, ValueError):
    """Malformed input data or configuration."""


class NumericalError(BayesRegError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


class NotPositiveDefinite(NumericalError):
    """Raised when a Cholesky factorization hits a non-positive pivot."""


class NoSignFixedPoint(NumericalError):
    """The Laplace-prior sign iteration cycled without reaching a fixed point.

    The visited sign vectors are kept on ``trace`` for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
