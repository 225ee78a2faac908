"""Exception hierarchy shared by every capdetect module."""


class CapDetectError(Exception):
    """Base class for all errors raised by capdetect."""


class DimensionError(CapDetectError, ValueError):
    """Shapes or dimension labels do not fit together."""


class NonHermitianInput(CapDetectError, ValueError):
    pass


class ConvergenceFailure(CapDetectError, ArithmeticError):
    pass


class SignificantNegativeEigenvalue(CapDetectError, ValueError):
    pass


class ZeroVector(CapDetectError, ValueError):
    pass


class RankDeficientInput(CapDetectError, ValueError):
    pass


class RankInconsistency(CapDetectError, ArithmeticError):
    """Two formulas for the same minimal dimension disagree numerically."""


class InvalidChoi(CapDetectError, ValueError):
    pass


class InvalidChannel(CapDetectError, ValueError):
    pass


class GridTooCoarse(CapDetectError, ValueError):
    pass


class NumericalAnomaly(CapDetectError, ArithmeticError):
    """A result contradicts an identity that holds in exact arithmetic."""
