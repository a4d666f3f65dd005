"""Exception hierarchy shared by all csdoa modules."""


class CsdoaError(Exception):
    """Base class for every error raised by csdoa.

    ``stage`` is filled in by :func:`csdoa.rootmusic.estimate_doa` with the
    pipeline stage that raised.
    """

    stage = None


class DomainError(CsdoaError, ValueError):
    """An argument lies outside the domain of the operation."""


class BoundError(DomainError):
    """The compressed dimension ``m`` violates ``M < m < N``."""

    def __init__(self, reason, message=None):
        self.reason = reason
        super().__init__(message or reason)


class GeometryError(DomainError):
    """The array geometry is unsupported by the requested estimator."""


class DegenerateError(CsdoaError, ArithmeticError):
    """A numerically degenerate quantity (zero polynomial, zero V, ...)."""


class RankError(DegenerateError):
    """Too few candidate roots inside the unit circle."""


class AmbiguousRootError(DegenerateError):
    """A root's phase maps outside the visible region ``|sin(theta)| < 1``."""
