"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where a formula is defined."""


class UnphysicalStateError(DomainError):
    """A covariance matrix violates the uncertainty principle."""


class QuadratureError(RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class DataFileError(ValueError):
    """An estimation data file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SmallSampleWarning(UserWarning):
    """The normal approximation to the chi-squared law is used below its comfort zone."""


class InsufficientSamplesError(DomainError):
    """Too few estimation samples: the confidence region reaches zero transmission."""
