"""Quenched mixing times for time-inhomogeneous Markov chains."""

from mixlab.chain import (
    ChainSequence,
    Distribution,
    StochasticMatrix,
    TargetSeries,
    distance_to_target,
    dobrushin,
    existence_certificate,
    mixing_time,
    mixing_time_alt,
    target_distribution,
    target_series,
    tv_distance,
    window_product,
)
from mixlab.errors import (
    BudgetExceeded,
    DimensionMismatch,
    MissingTarget,
    MixLabError,
    NoContraction,
    NonLazyError,
    NotMixed,
    Unbounded,
    WindowError,
    ZeroMass,
)
from mixlab.kernels import BACKEND

__version__ = "0.1.0"
