"""Exception hierarchy.

Every error raised on purpose by this package derives from
:class:`PageRankMixingError`, which itself derives from ``ValueError`` so
that callers treating bad input generically keep working.
"""


class PageRankMixingError(ValueError):
    """Base class for all package errors."""


class SumMismatch(PageRankMixingError):
    """DCM in- and out-degree sums differ."""


class MinDegree(PageRankMixingError):
    """A degree is below the required minimum of 2."""


class MissingInDegrees(PageRankMixingError):
    """A DCM sequence was given without in-degrees."""


class DegreeExceedsN(PageRankMixingError):
    """An OCM out-degree is larger than the number of vertices."""


class RetryLimitExceeded(PageRankMixingError):
    """Rejection sampling for a simple graph hit its retry cap."""


class DiscontinuityPoint(PageRankMixingError):
    """A limit profile was evaluated exactly at its jump."""


class AlphaZero(PageRankMixingError):
    """The PageRank series was requested with alpha = 0."""


class NoConvergence(PageRankMixingError):
    """Power iteration did not reach the requested residual."""


class LengthMismatch(PageRankMixingError):
    """Two distributions have different lengths."""


class HorizonTooShort(PageRankMixingError):
    """A profile never drops below the requested level."""


class EtaTooLarge(PageRankMixingError):
    """The time t exceeds floor((1 - 2 eta) T_ent)."""


class BoundVacuous(PageRankMixingError):
    """A coupling bound is >= 1 and therefore says nothing."""


class ConfigInvalid(PageRankMixingError):
    """An experiment configuration failed validation."""


class InvariantViolation(AssertionError):
    """A mathematically guaranteed inequality failed numerically."""
