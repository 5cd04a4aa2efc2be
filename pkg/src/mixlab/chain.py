"""Time-inhomogeneous chains: matrices, window products, target distributions, mixing times.

Time conventions: ``seq.matrix(t)`` is the transition from time ``t - 1`` to
``t``, and ``window_product(seq, s, t)`` is ``P_{s+1} @ ... @ P_t``.  The
target distribution at time ``t`` is the common row of ``P^{s,t}`` as
``s -> -inf``; it is computed here at a finite lookback certified by the
Dobrushin coefficient of the product.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from mixlab import kernels
from mixlab.errors import (
    DimensionMismatch,
    MissingTarget,
    NoContraction,
    NotMixed,
    WindowError,
)
from mixlab.rng import substream

DEFAULT_TOL = 1e-9
DEFAULT_MAX_LOOKBACK = 1 << 16


def atol_for(n: int) -> float:
    """Absolute comparison tolerance used for n-state objects."""
    return 1e-12 if n <= 16 else 1e-9


class NonLazyWarning(UserWarning):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Dense row-stochastic matrix; immutable after construction."""

    rows: np.ndarray

    def __post_init__(self):
        a = _frozen(self.rows)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
        tol = atol_for(a.shape[0])
        if (a < -tol).any() or (a > 1 + tol).any():
            raise ValueError("entries must lie in [0, 1]")
        if np.abs(a.sum(axis=1) - 1.0).max() > tol:
            raise ValueError("rows must sum to 1")
        object.__setattr__(self, "rows", a)

    @classmethod
    def _trusted(cls, a: np.ndarray) -> "StochasticMatrix":
        # skips validation; only for products of already-validated matrices
        obj = object.__new__(cls)
        a = np.asarray(a, dtype=np.float64)
        a.setflags(write=False)
        object.__setattr__(obj, "rows", a)
        return obj

    @classmethod
    def identity(cls, n: int) -> "StochasticMatrix":
        return cls._trusted(np.eye(n))

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def lazy(self) -> bool:
        return bool((np.diag(self.rows) >= 0.5 - atol_for(self.n)).all())

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        if other.n != self.n:
            raise DimensionMismatch(f"{self.n} vs {other.n}")
        return StochasticMatrix._trusted(self.rows @ other.rows)

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.rows.tolist()}

    @classmethod
    def from_json(cls, obj) -> "StochasticMatrix":
        if isinstance(obj, dict):
            m = cls(np.asarray(obj["rows"], dtype=np.float64))
            if m.n != obj.get("n", m.n):
                raise DimensionMismatch("declared n does not match rows")
            return m
        return cls(np.asarray(obj, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Distribution:
    mass: np.ndarray

    def __post_init__(self):
        a = _frozen(self.mass)
        if a.ndim != 1 or a.size == 0:
            raise DimensionMismatch("mass must be a non-empty vector")
        tol = atol_for(a.size)
        if (a < -tol).any():
            raise ValueError("masses must be nonnegative")
        if abs(a.sum() - 1.0) > tol:
            raise ValueError(f"masses sum to {a.sum()!r}, not 1")
        object.__setattr__(self, "mass", a)

    @property
    def n(self) -> int:
        return self.mass.size

    @property
    def min(self) -> float:
        return float(self.mass.min())

    def __getitem__(self, x):
        return self.mass[x]

    def to_json(self) -> dict:
        return {"n": self.n, "mass": self.mass.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Distribution":
        d = cls(np.asarray(obj["mass"], dtype=np.float64))
        if d.n != obj.get("n", d.n):
            raise DimensionMismatch("declared n does not match mass")
        return d


def _as_matrix(m) -> StochasticMatrix:
    return m if isinstance(m, StochasticMatrix) else StochasticMatrix(np.asarray(m))


class ChainSequence:
    """Integer-time indexed provider of transition matrices.

    ``window = (t_lo, t_hi)`` means the matrices ``P_t`` for
    ``t_lo < t <= t_hi`` are available; ``None`` marks an unbounded side.
    Lookups are cached; the getter must be deterministic in ``t``.
    """

    def __init__(
        self,
        n: int,
        getter: Callable[[int], StochasticMatrix],
        window: tuple[int | None, int | None] = (None, None),
        *,
        source: dict | None = None,
        cache_size: int = 128,
    ):
        self.n = int(n)
        self.window = window
        self.source = source or {}
        self._warned = False

        @functools.lru_cache(maxsize=cache_size)
        def _get(t: int) -> StochasticMatrix:
            m = _as_matrix(getter(t))
            if m.n != self.n:
                raise DimensionMismatch(f"matrix at t={t} has n={m.n}, expected {self.n}")
            if not m.lazy and not self._warned:
                self._warned = True
                warnings.warn("sequence contains non-lazy matrices", NonLazyWarning, stacklevel=3)
            return m

        self._get = _get

    def __repr__(self):
        return f"ChainSequence(n={self.n}, window={self.window}, source={self.source.get('kind')!r})"

    @classmethod
    def explicit(
        cls,
        matrices: Sequence,
        start: int = 1,
        history=None,
    ) -> "ChainSequence":
        """Sequence with ``matrices[k]`` at time ``start + k``.

        With ``history`` every earlier time uses that fixed matrix, so target
        distributions can look back indefinitely.
        """
        mats = [_as_matrix(m) for m in matrices]
        if not mats:
            raise ValueError("need at least one matrix")
        n = mats[0].n
        hist = _as_matrix(history) if history is not None else None
        for m in mats + ([hist] if hist is not None else []):
            if m.n != n:
                raise DimensionMismatch(f"matrices of sizes {n} and {m.n} in one sequence")
        end = start + len(mats) - 1

        def getter(t):
            if start <= t <= end:
                return mats[t - start]
            if t < start and hist is not None:
                return hist
            raise WindowError(f"no matrix at time {t}")

        lo = None if hist is not None else start - 1
        src = {"kind": "explicit", "start": start, "matrices": mats, "history": hist}
        return cls(n, getter, (lo, end), source=src, cache_size=max(len(mats), 1) + 1)

    @classmethod
    def constant(cls, P) -> "ChainSequence":
        P = _as_matrix(P)
        return cls(P.n, lambda t: P, (None, None), source={"kind": "constant", "matrix": P}, cache_size=1)

    @classmethod
    def from_sampler(cls, n: int, sampler: Callable[[int], object], *, source: dict | None = None,
                     cache_size: int = 128) -> "ChainSequence":
        return cls(n, sampler, (None, None), source=source or {"kind": "sampler"}, cache_size=cache_size)

    def covers(self, s: int, t: int) -> bool:
        lo, hi = self.window
        return (lo is None or s >= lo) and (hi is None or t <= hi)

    def matrix(self, t: int) -> StochasticMatrix:
        lo, hi = self.window
        if (lo is not None and t <= lo) or (hi is not None and t > hi):
            raise WindowError(f"time {t} outside window {self.window}")
        return self._get(int(t))


def tv_distance(mu, nu) -> float:
    a = mu.mass if isinstance(mu, Distribution) else np.asarray(mu, dtype=np.float64)
    b = nu.mass if isinstance(nu, Distribution) else np.asarray(nu, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())


def dobrushin(P) -> float:
    """Largest total-variation distance between two rows of ``P``."""
    rows = P.rows if isinstance(P, StochasticMatrix) else np.asarray(P, dtype=np.float64)
    if rows.shape[0] == 1:
        return 0.0
    return float(kernels.dobrushin(rows))


def window_product(seq: ChainSequence, s: int, t: int) -> StochasticMatrix:
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    if not seq.covers(s, t):
        raise WindowError(f"window {seq.window} does not cover ({s}, {t}]")
    prod = np.eye(seq.n)
    for k in range(s + 1, t + 1):
        prod = prod @ seq.matrix(k).rows
    return StochasticMatrix._trusted(prod)


def iter_products(seq: ChainSequence, s: int, t_max: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, P^{s,s+k})`` for k = 0..t_max, one multiply per step."""
    prod = np.eye(seq.n)
    yield 0, prod
    for k in range(1, t_max + 1):
        prod = prod @ seq.matrix(s + k).rows
        yield k, prod


@dataclass(frozen=True)
class TargetResult:
    distribution: Distribution
    delta: float
    lookback: int


def target_distribution(
    seq: ChainSequence,
    t: int,
    tol: float = DEFAULT_TOL,
    max_lookback: int = DEFAULT_MAX_LOOKBACK,
) -> TargetResult:
    """Approximate the target distribution at time ``t``.

    Doubles the lookback B = 1, 2, 4, ... until the Dobrushin coefficient of
    ``P^{t-B,t}`` is at most ``tol`` and returns its first row.  Every row is
    then within ``tol`` of the exact target in total variation.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    B = 1
    if not seq.covers(t - 1, t):
        raise WindowError(f"no matrix at time {t}")
    prod = seq.matrix(t).rows
    while True:
        delta = dobrushin(prod)
        if delta <= tol:
            row = prod[0] / prod[0].sum()
            return TargetResult(Distribution(row), delta, B)
        if 2 * B > max_lookback:
            raise NoContraction(
                f"delta(P^{{t-B,t}}) = {delta:.3g} > {tol:.3g} at lookback {B} (t={t})"
            )
        if not seq.covers(t - 2 * B, t - B):
            raise WindowError(
                f"history exhausted at lookback {B} (t={t}); delta = {delta:.3g} > {tol:.3g}"
            )
        prod = window_product(seq, t - 2 * B, t - B).rows @ prod
        B *= 2


@dataclass(frozen=True, eq=False)
class TargetSeries:
    """Target distributions on ``t_start..t_end``.

    The first one is certified at ``lookback`` with ``delta``; later ones are
    advanced by ``pi_{t+1} = pi_t P_{t+1}``, which keeps the same certificate
    because the Dobrushin coefficient is submultiplicative and at most 1.
    """

    t_start: int
    t_end: int
    pis: np.ndarray = field(repr=False)
    delta: float
    lookback: int
    tol: float

    def __post_init__(self):
        self.pis.setflags(write=False)

    def __contains__(self, t: int) -> bool:
        return self.t_start <= t <= self.t_end

    def vector(self, t: int) -> np.ndarray:
        if t not in self:
            raise MissingTarget(f"no target at t={t} (have {self.t_start}..{self.t_end})")
        return self.pis[t - self.t_start]

    def __getitem__(self, t: int) -> Distribution:
        return Distribution(self.vector(t))

    def pi_min(self, t: int) -> float:
        return float(self.vector(t).min())

    def lookback_at(self, t: int) -> int:
        return self.lookback + (t - self.t_start)


def target_series(
    seq: ChainSequence,
    t_start: int,
    t_end: int,
    tol: float = DEFAULT_TOL,
    max_lookback: int = DEFAULT_MAX_LOOKBACK,
) -> TargetSeries:
    if t_end < t_start:
        raise ValueError("t_end < t_start")
    first = target_distribution(seq, t_start, tol, max_lookback)
    pis = np.empty((t_end - t_start + 1, seq.n))
    pis[0] = first.distribution.mass
    atol = atol_for(seq.n)
    for k in range(1, pis.shape[0]):
        pis[k] = pis[k - 1] @ seq.matrix(t_start + k).rows
        drift = abs(pis[k].sum() - 1.0)
        if drift > atol:
            raise AssertionError(f"target mass drifted by {drift:.3g} at t={t_start + k}")
    return TargetSeries(t_start, t_end, pis, first.delta, first.lookback, tol)


def invariance_residual(seq: ChainSequence, targets: TargetSeries, r: int, t: int) -> float:
    """max_y |(pi_r P^{r,t})(y) - pi_t(y)|."""
    pushed = targets.vector(r) @ window_product(seq, r, t).rows
    return float(np.abs(pushed - targets.vector(t)).max())


def row_distances(prod: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(prod - pi[None, :]).sum(axis=1)


def distance_to_target(seq: ChainSequence, s: int, t: int, targets: TargetSeries) -> float:
    """d(s, t) = max_x TV(P^{s,t}(x, .), pi_t)."""
    pi = targets.vector(t)
    return float(row_distances(window_product(seq, s, t).rows, pi).max())


def distance_profile(seq: ChainSequence, s: int, t_max: int, targets: TargetSeries) -> np.ndarray:
    """d(s, s+k) for k = 0..t_max."""
    out = np.empty(t_max + 1)
    for k, prod in iter_products(seq, s, t_max):
        out[k] = row_distances(prod, targets.vector(s + k)).max()
    return out


def _ensure_targets(seq, s, t_max, targets):
    if targets is None:
        return target_series(seq, s, s + t_max)
    if s not in targets or (s + t_max) not in targets:
        raise MissingTarget(f"targets must cover {s}..{s + t_max}")
    return targets


def mixing_time(
    seq: ChainSequence,
    eps: float,
    s: int = 0,
    t_max: int = 1000,
    targets: TargetSeries | None = None,
    verify: bool = True,
) -> int:
    """Smallest t in [0, t_max] with d(s, s+t) <= eps.

    With ``verify`` the scan continues to ``t_max`` and raises
    ``AssertionError`` if a later distance exceeds ``eps`` again.
    Raises ``NotMixed`` when no t qualifies.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    targets = _ensure_targets(seq, s, t_max, targets)
    atol = atol_for(seq.n)
    found = None
    for k, prod in iter_products(seq, s, t_max):
        d = float(row_distances(prod, targets.vector(s + k)).max())
        if found is None:
            if d <= eps:
                found = k
                if not verify:
                    return k
        elif d > eps + atol:
            raise AssertionError(f"d({s},{s + k}) = {d!r} > eps after mixing at t={found}")
    if found is None:
        raise NotMixed(f"d({s}, {s}+t) > {eps} for all t <= {t_max}")
    return found


def mixing_time_alt(seq: ChainSequence, eps: float, s: int = 0, t_max: int = 1000) -> int:
    """Smallest t in [0, t_max] with dobrushin(P^{s,s+t}) <= eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    for k, prod in iter_products(seq, s, t_max):
        if dobrushin(prod) <= eps:
            return k
    raise NotMixed(f"delta(P^{{{s},{s}+t}}) > {eps} for all t <= {t_max}")


def existence_certificate(seq: ChainSequence, window: tuple[int, int], eps: float) -> int:
    """Number of k in (lo, hi] with dobrushin(P_k) <= 1 - eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    lo, hi = window
    return sum(dobrushin(seq.matrix(k)) <= 1 - eps for k in range(lo + 1, hi + 1))


def linear_stationary(P) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 by least squares (static reference)."""
    A = P.rows if isinstance(P, StochasticMatrix) else np.asarray(P, dtype=np.float64)
    n = A.shape[0]
    M = np.vstack([A.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(M, b, rcond=None)[0]


# random test chains


def random_stochastic(rng: np.random.Generator, n: int, alpha: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(n, alpha), size=n)


def random_lazy(rng: np.random.Generator, n: int, exact_half: bool = False) -> np.ndarray:
    """Random lazy matrix ``(I + Q) / 2``.

    With ``exact_half`` Q has zero diagonal, so every diagonal entry is exactly 1/2.
    """
    if exact_half and n > 1:
        Q = np.zeros((n, n))
        off = rng.dirichlet(np.ones(n - 1), size=n)
        for x in range(n):
            Q[x, np.arange(n) != x] = off[x]
    else:
        Q = random_stochastic(rng, n)
    return 0.5 * (np.eye(n) + Q)


def random_lazy_sequence(n: int, seed: int, trial: int = 0, exact_half: bool = False) -> ChainSequence:
    """Environment-backed sequence of independent random lazy matrices, one substream per time."""

    def sampler(t):
        return StochasticMatrix(random_lazy(substream(seed, "random_chain", t, trial), n, exact_half))

    src = {"kind": "random_lazy", "seed": seed, "trial": trial, "exact_half": exact_half}
    return ChainSequence.from_sampler(n, sampler, source=src, cache_size=4096)

