"""Exception hierarchy shared by all modules."""


class RsdcmError(Exception):
    """Base class for all package errors."""


class DomainError(RsdcmError, ValueError):
    """A state or argument lies outside the domain where a formula is defined."""


class IntegrationError(DomainError):
    """ODE integration left the valid domain.

    Attributes
    ----------
    step, region : int
        Integration step and region index at which the violation occurred.
    """

    def __init__(self, message, step=None, region=None):
        super().__init__(message)
        self.step = step
        self.region = region


class ShapeError(RsdcmError, ValueError):
    """Array shapes are inconsistent."""


class ConfigurationError(RsdcmError, ValueError):
    """A configuration record is invalid or cannot be honoured."""


class InstabilityError(RsdcmError, ArithmeticError):
    """A transition matrix is not Schur stable."""


class NumericalError(RsdcmError, ArithmeticError):
    """A factorization failed (e.g. a covariance lost positive definiteness)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DataError(RsdcmError, ValueError):
    """Input data is degenerate (e.g. a constant time series)."""


class ParseError(RsdcmError, ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class EstimationError(RsdcmError, RuntimeError):
    """EM diverged. ``trace`` holds the objective values seen so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class GenerationError(RsdcmError, RuntimeError):
    """Synthetic data could not be generated."""


class BatchError(RsdcmError, RuntimeError):
    """Too many Monte-Carlo runs failed."""
