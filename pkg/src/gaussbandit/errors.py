"""Exception types raised across the package."""


class GaussBanditError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(GaussBanditError, ValueError):
    pass


class NonFinite(GaussBanditError, ValueError):
    pass


class DimensionMismatch(GaussBanditError, ValueError):
    pass


class StateMismatch(DimensionMismatch):
    pass


class InvalidHorizon(GaussBanditError, ValueError):
    pass


class InvalidRadius(GaussBanditError, ValueError):
    pass


class ConfigInvalid(GaussBanditError, ValueError):
    pass


class NonFiniteLoss(NonFinite):
    pass


class InsufficientData(GaussBanditError, ValueError):
    pass


class NonpositiveRegret(GaussBanditError, ValueError):
    """Regret fit undefined because some cumulative regret is <= 0."""
