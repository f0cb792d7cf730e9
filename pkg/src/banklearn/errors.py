"""Shared exception types."""


class DimensionError(ValueError):
    """Array shapes do not conform to what an operation expects."""


class InvalidCovarianceError(ValueError):
    """A covariance/scale matrix is not symmetric positive definite."""


class UndefinedVarianceError(ValueError):
    """Predictive variance is undefined (a_n <= 1).

    The predictive mean is still well defined; it is attached as `.mean`
    so callers that only asked for the variance by accident can recover.
    """

    def __init__(self, message, mean=None):
        super().__init__(message)
        self.mean = mean


class ChainDivergedError(RuntimeError):
    """Log evidence became non-finite during sampling.

    Carries a text dump of the sampler state for post-mortems.
    """

    def __init__(self, message, state_dump=""):
        super().__init__(message)
        self.state_dump = state_dump


class ModelFormatError(ValueError):
    """A persisted model file is malformed or has the wrong version."""


class ConfigError(ValueError):
    """A run configuration is missing fields or has invalid values."""
