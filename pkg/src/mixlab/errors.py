"""Exception types raised across the package."""


class MixLabError(Exception):
    """Base class for package errors."""


class DimensionMismatch(MixLabError, ValueError):
    pass


class WindowError(MixLabError):
    """A requested time range is not covered by the sequence's window."""


class NoContraction(MixLabError):
    """The Dobrushin coefficient never dropped below the tolerance within the lookback budget."""


class NotMixed(MixLabError):
    """No time within the horizon reached the requested distance."""


class MissingTarget(MixLabError, KeyError):
    pass


class ZeroMass(MixLabError):
    """A target distribution has a zero entry where a strictly positive one is required."""


class NonLazyError(MixLabError):
    """A transition matrix with a diagonal entry below 1/2 was given to a routine that needs laziness."""


class BudgetExceeded(MixLabError):
    pass


class Unbounded(MixLabError):
    """A bound is infinite because the bottleneck term vanished."""
