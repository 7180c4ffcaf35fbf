"""Exception types raised across the package."""


class LofError(Exception):
    """Base class for all package errors."""


class SingularCovariance(LofError):
    pass


class DimensionError(LofError):
    pass


class DegenerateGeometry(LofError):
    """Target and agent coincide, so bearing and its Jacobian are undefined."""


class NonFiniteInput(LofError):
    pass


class EmptyTape(LofError):
    pass


class NegativeWeight(LofError):
    pass


class ShapeMismatch(LofError):
    pass


class NonPositive(LofError):
    pass


class DegenerateDenominator(LofError):
    pass


class ConfigError(LofError):
    """Bad configuration key or value. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class TrainingError(LofError):
    """A numeric failure during training; the message names the iteration."""
