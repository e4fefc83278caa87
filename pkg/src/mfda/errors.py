"""Exception hierarchy shared by every module."""


class MFDAError(Exception):
    """Base class for all package errors."""


class ValidationError(MFDAError, ValueError):
    """An input violates a documented precondition or invariant."""


class InfeasibleGeometryError(ValidationError):
    """A per-antenna search window is empty."""


class NumericalError(MFDAError, RuntimeError):
    """A numerical routine failed to converge.

    ``trace`` carries whatever iteration log the failing solver produced.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvariantError(MFDAError, RuntimeError):
    """An internal guarantee (e.g. MM monotonicity) was violated."""


class DegenerateCurvatureError(MFDAError):
    """The summed majorizer curvature is not positive."""


class DecouplingError(MFDAError):
    """Antenna positions cannot change the channel correlation.

    Raised when Bob and Eve share the same direction sine, so the position
    term of every delay vanishes.
    """
