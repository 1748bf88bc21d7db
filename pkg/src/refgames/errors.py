"""Exception types raised by the engines."""

from __future__ import annotations


class RefGamesError(Exception):
    """Base class for every error raised by this package."""


class InvalidDomain(RefGamesError, ValueError):
    """Feasible set fails its convexity or non-degeneracy checks."""


class SegmentDomain(RefGamesError, ValueError):
    """Operation needs a two-dimensional polygon but got a segment."""


class NonPositiveScale(RefGamesError, ValueError):
    pass


class DomainError(RefGamesError, ValueError):
    """Argument outside the domain of a map (e.g. x not in [0, 1])."""


class LengthMismatch(RefGamesError, ValueError):
    pass


class EmptySampleSet(RefGamesError, ValueError):
    pass


class UnnormalizedInput(RefGamesError, ValueError):
    """Grid measure total mass is off by more than 1e-6."""


class ScheduleTooShort(RefGamesError, ValueError):
    pass


class SchemaMismatch(RefGamesError, ValueError):
    pass


class ConfigError(RefGamesError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NotConverged(RefGamesError):
    """Step cap reached before the stopping rule fired.

    The partial result is kept on ``report`` so callers can still inspect it.
    """

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)
