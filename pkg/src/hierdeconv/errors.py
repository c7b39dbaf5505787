"""Exception types raised across the package."""


class DeconvError(Exception):
    """Base class for all package errors."""


class NotSymmetric(DeconvError, ValueError):
    pass


class NotPositiveDefinite(DeconvError, ValueError):
    pass


class DimensionMismatch(DeconvError, ValueError):
    pass


class InvalidSmoothness(DeconvError, ValueError):
    pass


class InvalidTau(DeconvError, ValueError):
    pass


class OutOfDomain(DeconvError, ValueError):
    pass


class GridMismatch(DeconvError, ValueError):
    pass


class ZeroTruth(DeconvError, ValueError):
    pass


class TooShort(DeconvError, ValueError):
    pass


class NonFiniteObjective(DeconvError, ArithmeticError):
    pass


class ConfigError(DeconvError, ValueError):
    """Invalid or unreadable run configuration."""
