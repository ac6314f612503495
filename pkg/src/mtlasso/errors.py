"""Exception types raised by mtlasso."""


class MtlassoError(Exception):
    """Base class for all mtlasso errors."""


class DimensionError(MtlassoError):
    """Array shapes are inconsistent with the multi-task model."""


class UnsupportedNormError(MtlassoError):
    """Requested block-norm exponent pair is not supported."""


class DomainError(MtlassoError):
    """Scalar argument outside the mathematical domain of a formula."""


class ConfigError(MtlassoError):
    """Invalid experiment or model configuration."""


class SingularMatrixError(MtlassoError):
    """A matrix that must be invertible is singular (or numerically so)."""


class SpdError(MtlassoError):
    """A matrix that must be symmetric positive definite is not."""


class DataError(MtlassoError):
    """Input data contains NaN or other unusable values."""
