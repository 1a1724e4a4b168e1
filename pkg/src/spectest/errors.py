"""Exception types shared across the package."""


class SpecTestError(Exception):
    """Base class for errors raised by spectest."""


class DegenerateDataError(SpecTestError, ValueError):
    """Data cannot support the requested computation (zero variance, too few points, ...)."""


class ConvergenceError(SpecTestError, RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, gap=None, iterations=None):
        super().__init__(message)
        self.gap = gap
        self.iterations = iterations

