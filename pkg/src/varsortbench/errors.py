"""Exception types shared across the package."""

__all__ = [
    "ConfigurationError",
    "IntegrityError",
    "DataError",
    "DegenerateDataError",
    "UndefinedMetricError",
    "MecSizeError",
    "SingularModelError",
    "ParseError",
]


class ConfigurationError(ValueError):
    """Invalid sampler, learner, or experiment configuration."""


class IntegrityError(RuntimeError):
    """Internal consistency violated, e.g. a cycle where a DAG is required."""


class DataError(ValueError):
    """Input data unusable, e.g. non-finite entries."""


class DegenerateDataError(DataError):
    """Data degenerate for the requested operation, e.g. a constant column."""


class UndefinedMetricError(ValueError):
    """The requested quantity is undefined for the given input."""


class MecSizeError(RuntimeError):
    """Equivalence-class enumeration exceeded its member cap."""


class SingularModelError(RuntimeError):
    """Likelihood or determinant degenerated during optimization."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ParseError(ValueError):
    """Malformed input file."""

    def __init__(self, message, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
