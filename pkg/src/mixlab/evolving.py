"""Evolving sets for time-inhomogeneous chains and the bottleneck mixing bound.

One uniform U per step decides every membership at once: the successor of S
is ``{y : Q_{t+1}(S, y) / pi_{t+1}(y) >= U}``.  The successor law is therefore
supported on at most n + 1 nested sets, and every expectation over one step
is an exact finite sum (``NestedKernel``).  Sets are bitmasks over ``[n]``
with state ``x`` at bit ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from mixlab import kernels
from mixlab.chain import ChainSequence, TargetSeries
from mixlab.errors import BudgetExceeded, NonLazyError, Unbounded, ZeroMass
from mixlab.rng import substream

MERGE_TOL = 1e-13
HALF_TOL = 1e-12
MAX_EXHAUSTIVE_N = 20


@dataclass(frozen=True)
class SubsetState:
    n: int
    mask: int

    def __post_init__(self):
        if not 0 <= self.mask < (1 << self.n):
            raise ValueError(f"mask {self.mask:#x} out of range for n={self.n}")

    @classmethod
    def of(cls, n: int, members: Iterable[int]) -> "SubsetState":
        mask = 0
        for x in members:
            if not 0 <= x < n:
                raise ValueError(f"state {x} not in [0, {n})")
            mask |= 1 << x
        return cls(n, mask)

    @classmethod
    def full(cls, n: int) -> "SubsetState":
        return cls(n, (1 << n) - 1)

    @classmethod
    def empty(cls, n: int) -> "SubsetState":
        return cls(n, 0)

    @property
    def members(self) -> list[int]:
        return [x for x in range(self.n) if self.mask >> x & 1]

    @property
    def indicator(self) -> np.ndarray:
        return np.array([self.mask >> x & 1 for x in range(self.n)], dtype=bool)

    def __len__(self):
        return bin(self.mask).count("1")

    def __contains__(self, x: int) -> bool:
        return bool(self.mask >> x & 1)

    def complement(self) -> "SubsetState":
        return SubsetState(self.n, ((1 << self.n) - 1) ^ self.mask)

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    @property
    def is_full(self) -> bool:
        return self.mask == (1 << self.n) - 1

    @property
    def absorbing(self) -> bool:
        return self.is_empty or self.is_full

    def mass(self, pi) -> float:
        return float(np.asarray(pi)[self.indicator].sum())

    def sharp(self, pi) -> "SubsetState":
        """S itself, or its complement when it carries more than half the mass."""
        return self.complement() if self.mass(pi) > 0.5 else self


def mask_mass(mask: int, pi: np.ndarray) -> float:
    return float(sum(pi[x] for x in range(pi.size) if mask >> x & 1))


def _require_positive(pi: np.ndarray, t: int):
    if (pi <= 0).any():
        raise ZeroMass(f"target at t={t} has zero entries {np.flatnonzero(pi <= 0).tolist()}")


def _require_lazy(seq: ChainSequence, t: int):
    if not seq.matrix(t).lazy:
        raise NonLazyError(f"P_{t} is not lazy")


@dataclass(frozen=True, eq=False)
class FlowSlice:
    """Stationary flow ``Q_t(S, y)`` into every y for one set S."""

    t: int
    subset: SubsetState
    values: np.ndarray = field(repr=False)
    source_mass: float

    @property
    def total(self) -> float:
        return float(self.values.sum())


def stationary_flow(targets: TargetSeries, seq: ChainSequence, t: int, S: SubsetState) -> FlowSlice:
    """Q_t(S, y) = sum_{x in S} pi_{t-1}(x) P_t(x, y)."""
    pi_prev = targets.vector(t - 1)
    _require_positive(pi_prev, t - 1)
    ind = S.indicator
    values = pi_prev[ind] @ seq.matrix(t).rows[ind]
    values = np.asarray(values, dtype=np.float64).reshape(S.n)
    values.setflags(write=False)
    return FlowSlice(t, S, values, float(pi_prev[ind].sum()))


@dataclass(frozen=True, eq=False)
class NestedKernel:
    """Exact one-step law of the evolving set.

    ``thresholds`` are the distinct membership ratios in decreasing order and
    ``sets[k]`` is ``{y : ratio_y >= thresholds[k]}``.  ``outcomes`` lists
    ``(mask, probability)`` pairs with zero-probability outcomes dropped,
    including the empty set when the largest ratio is below 1.
    """

    n: int
    ratios: np.ndarray = field(repr=False)
    thresholds: tuple[float, ...]
    sets: tuple[int, ...]
    outcomes: tuple[tuple[int, float], ...]

    def expect(self, fn) -> float:
        return sum(p * fn(mask) for mask, p in self.outcomes)


def _merge_levels(ratios: np.ndarray) -> np.ndarray:
    # ratios within MERGE_TOL of each other (or of 0 / 1) are one level
    r = np.clip(ratios, 0.0, 1.0)
    r[np.abs(r - 1.0) <= MERGE_TOL] = 1.0
    r[r <= MERGE_TOL] = 0.0
    order = np.argsort(-r, kind="stable")
    out = r.copy()
    lead = None
    for i in order:
        if lead is not None and lead - r[i] <= MERGE_TOL:
            out[i] = lead
        else:
            lead = r[i]
    return out


def nested_kernel(flow: FlowSlice, pi_next) -> NestedKernel:
    pi_next = pi_next.mass if hasattr(pi_next, "mass") else np.asarray(pi_next, dtype=np.float64)
    _require_positive(pi_next, flow.t)
    ratios = _merge_levels(flow.values / pi_next)
    ratios.setflags(write=False)
    levels = sorted({float(r) for r in ratios if r > 0.0}, reverse=True)
    sets = []
    for r in levels:
        mask = 0
        for y in np.flatnonzero(ratios >= r):
            mask |= 1 << int(y)
        sets.append(mask)
    outcomes = []
    top = levels[0] if levels else 0.0
    if top < 1.0:
        outcomes.append((0, 1.0 - top))
    for k, (r, mask) in enumerate(zip(levels, sets)):
        nxt = levels[k + 1] if k + 1 < len(levels) else 0.0
        if r - nxt > 0:
            outcomes.append((mask, r - nxt))
    return NestedKernel(flow.subset.n, ratios, tuple(levels), tuple(sets), tuple(outcomes))


def step_kernel(seq: ChainSequence, targets: TargetSeries, t: int, S: SubsetState) -> NestedKernel:
    """Kernel for the move from time t - 1 to t starting at S."""
    return nested_kernel(stationary_flow(targets, seq, t, S), targets.vector(t))


def evolve_step(S: SubsetState, kernel: NestedKernel, u: float) -> SubsetState:
    """Threshold set ``{y : ratio_y >= u}``.

    ``u = 0`` is read as the limit from above, ``{y : ratio_y > 0}``, which
    keeps the result inside the kernel's support.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    r = kernel.ratios
    members = r > 0 if u == 0.0 else r >= u
    mask = 0
    for y in np.flatnonzero(members):
        mask |= 1 << int(y)
    return SubsetState(S.n, mask)


@dataclass(frozen=True)
class Trace:
    t0: int
    states: tuple[SubsetState, ...]
    tau: int | None

    @property
    def absorbed(self) -> bool:
        return self.tau is not None

    @property
    def final(self) -> SubsetState:
        return self.states[-1]


def simulate_trace(
    seq: ChainSequence,
    targets: TargetSeries,
    S0: SubsetState,
    t0: int,
    horizon: int,
    seed: int,
    trial: int = 0,
    cache: dict | None = None,
) -> Trace:
    """Run the evolving set from ``S0`` at time ``t0`` until absorption or ``horizon`` steps.

    ``tau`` is the number of steps to reach the empty set or the full set
    (None if the horizon ran out first).  U at step k is drawn from the
    substream for time ``t0 + k``, so traces are reproducible per (seed, trial).
    """
    if S0.is_empty:
        raise ValueError("S0 must be nonempty")
    cache = {} if cache is None else cache
    states = [S0]
    S = S0
    if S.absorbing:
        return Trace(t0, tuple(states), 0)
    for k in range(1, horizon + 1):
        t = t0 + k
        key = (t, S.mask)
        kern = cache.get(key)
        if kern is None:
            kern = cache[key] = step_kernel(seq, targets, t, S)
        u = substream(seed, "evolve", t, trial).random()
        S = evolve_step(S, kern, u)
        states.append(S)
        if S.absorbing:
            return Trace(t0, tuple(states), k)
    return Trace(t0, tuple(states), None)


def iter_subset_laws(
    seq: ChainSequence,
    targets: TargetSeries,
    S0: SubsetState,
    t0: int,
    t: int,
    cache: dict | None = None,
):
    """Yield ``(s, law of S_s)`` for s = t0..t, laws as ``{mask: probability}``.

    ``cache`` maps ``(time, mask)`` to kernels and may be shared between calls
    on the same sequence and targets.
    """
    if t < t0:
        raise ValueError("t < t0")
    cache = {} if cache is None else cache
    full = (1 << S0.n) - 1
    law = {S0.mask: 1.0}
    yield t0, law
    for s in range(t0 + 1, t + 1):
        nxt: dict[int, float] = {}
        for mask, p in law.items():
            if mask == 0 or mask == full:
                nxt[mask] = nxt.get(mask, 0.0) + p
                continue
            kern = cache.get((s, mask))
            if kern is None:
                kern = cache[(s, mask)] = step_kernel(seq, targets, s, SubsetState(S0.n, mask))
            for m2, q in kern.outcomes:
                nxt[m2] = nxt.get(m2, 0.0) + p * q
        law = nxt
        yield s, law


def exact_subset_distribution(
    seq: ChainSequence,
    targets: TargetSeries,
    S0: SubsetState,
    t0: int,
    t: int,
    max_n: int = 12,
    max_steps: int = 8,
    cache: dict | None = None,
) -> dict[int, float]:
    """Exact law of ``S_t`` as ``{mask: probability}``."""
    if S0.n > max_n or t - t0 > max_steps:
        raise BudgetExceeded(f"exact enumeration limited to n <= {max_n}, t - t0 <= {max_steps}")
    law = None
    for _, law in iter_subset_laws(seq, targets, S0, t0, t, cache):
        pass
    return law


def membership_marginals(law: dict[int, float], n: int) -> np.ndarray:
    out = np.zeros(n)
    for mask, p in law.items():
        for y in range(n):
            if mask >> y & 1:
                out[y] += p
    return out


def laziness_factor(targets: TargetSeries, t: int) -> float:
    """g_t = min_z pi_{t-1}(z) / pi_t(z)."""
    return float((targets.vector(t - 1) / targets.vector(t)).min())


@dataclass(frozen=True)
class SetFunctionals:
    psi: float
    varphi: float
    phi: float


def set_functionals(seq: ChainSequence, targets: TargetSeries, t: int, S: SubsetState) -> SetFunctionals:
    if S.is_empty:
        raise ValueError("S must be nonempty")
    _require_lazy(seq, t)
    pi_prev, pi = targets.vector(t - 1), targets.vector(t)
    flow_s = stationary_flow(targets, seq, t, S)
    flow_c = stationary_flow(targets, seq, t, S.complement())
    base = flow_s.source_mass
    kern = nested_kernel(flow_s, pi)
    psi = 1.0 - kern.expect(lambda m: math.sqrt(mask_mass(m, pi) / base))
    varphi = float(np.minimum(flow_s.values, flow_c.values).sum()) / (2.0 * base)
    ind = S.indicator
    cut = float(flow_s.values[~ind].sum() + flow_c.values[ind].sum())
    return SetFunctionals(psi, varphi, cut / (2.0 * base))


def conductance(seq: ChainSequence, targets: TargetSeries, t: int, S: SubsetState) -> float:
    """Phi_t(S) alone, without the laziness requirement."""
    pi_prev = targets.vector(t - 1)
    P = seq.matrix(t).rows
    ind = S.indicator
    flow = pi_prev[:, None] * P
    cut = flow[np.ix_(ind, ~ind)].sum() + flow[np.ix_(~ind, ind)].sum()
    return float(cut) / (2.0 * float(pi_prev[ind].sum()))


def bottleneck_star(
    seq: ChainSequence,
    targets: TargetSeries,
    t: int,
    *,
    return_set: bool = False,
):
    """min Phi_t(S) over nonempty S with pi_{t-1}(S) <= 1/2, by exhaustive enumeration."""
    n = seq.n
    if n > MAX_EXHAUSTIVE_N:
        raise BudgetExceeded(f"exhaustive bottleneck limited to n <= {MAX_EXHAUSTIVE_N}")
    pi_prev = targets.vector(t - 1)
    _require_positive(pi_prev, t - 1)
    flow = pi_prev[:, None] * seq.matrix(t).rows
    value, mask = kernels.bottleneck_min(flow, pi_prev, 0.5 + HALF_TOL)
    value = float(value)
    if return_set:
        return value, SubsetState(n, mask)
    return value


def bottleneck_sampled(
    seq: ChainSequence,
    targets: TargetSeries,
    t: int,
    samples: int,
    seed: int,
) -> float:
    """Minimum of Phi_t over randomly drawn qualifying sets.

    Not exact: this is an upper estimate of the bottleneck ratio, for n too
    large for enumeration.
    """
    n = seq.n
    pi_prev = targets.vector(t - 1)
    P = seq.matrix(t).rows
    flow = pi_prev[:, None] * P
    W = flow + flow.T
    rng = substream(seed, "misc", t)
    best = math.inf
    for _ in range(samples):
        size = int(rng.integers(1, max(2, n // 2 + 1)))
        ind = np.zeros(n, dtype=bool)
        ind[rng.choice(n, size=size, replace=False)] = True
        m = float(pi_prev[ind].sum())
        if m > 0.5 + HALF_TOL:
            continue
        best = min(best, float(W[np.ix_(ind, ~ind)].sum()) / (2.0 * m))
    return best


def bottleneck_term(g: float, phi_star: float) -> float:
    """((1/2) g / (1 - g/2) Phi*)^2."""
    return (0.5 * g / (1.0 - 0.5 * g) * phi_star) ** 2


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Per-step ingredients of the evolving-set mixing bound on (t_start, t]."""

    t_start: int
    g: np.ndarray
    phi_star: np.ndarray
    factor: np.ndarray
    running_product: np.ndarray
    theta: np.ndarray
    pi_min_start: float
    pi_min: np.ndarray

    @property
    def t(self) -> int:
        return self.t_start + len(self.g)

    def steps(self) -> range:
        return range(self.t_start + 1, self.t + 1)

    def truncate(self, t: int) -> "BoundReport":
        k = t - self.t_start
        if not 0 < k <= len(self.g):
            raise ValueError(f"t={t} outside report range")
        return BoundReport(
            self.t_start, self.g[:k], self.phi_star[:k], self.factor[:k],
            self.running_product[:k], self.theta[:k], self.pi_min_start, self.pi_min[:k],
        )

    @property
    def theta_t(self) -> float:
        return float(self.theta[-1])

    @property
    def pi_min_t(self) -> float:
        return float(self.pi_min[-1])

    def rows(self):
        for k, s in enumerate(self.steps()):
            yield {
                "s": s,
                "g_s": float(self.g[k]),
                "phi_star_s": float(self.phi_star[k]),
                "factor_s": float(self.factor[k]),
                "running_product": float(self.running_product[k]),
                "theta_s": float(self.theta[k]),
            }


BOUND_REPORT_COLUMNS = ("s", "g_s", "phi_star_s", "factor_s", "running_product", "theta_s")


def bound_report(seq: ChainSequence, targets: TargetSeries, t: int, t_start: int = 0) -> BoundReport:
    if t <= t_start:
        raise ValueError("need t > t_start")
    k = t - t_start
    g = np.empty(k)
    phi = np.empty(k)
    pmin = np.empty(k)
    for i, s in enumerate(range(t_start + 1, t + 1)):
        _require_lazy(seq, s)
        g[i] = laziness_factor(targets, s)
        phi[i] = bottleneck_star(seq, targets, s)
        pmin[i] = targets.pi_min(s)
    terms = np.array([bottleneck_term(a, b) for a, b in zip(g, phi)])
    factor = 1.0 - 0.5 * terms
    return BoundReport(
        t_start, g, phi, factor, np.cumprod(factor), np.minimum.accumulate(terms),
        targets.pi_min(t_start), pmin,
    )


def theta(report: BoundReport) -> float:
    """min over s of ((1/2) g_s / (1 - g_s/2) Phi*_s)^2."""
    return float(min(bottleneck_term(a, b) for a, b in zip(report.g, report.phi_star)))


def theorem_lhs(report: BoundReport) -> float:
    return float(report.running_product[-1]) / math.sqrt(report.pi_min_t * report.pi_min_start)


def theorem_condition(report: BoundReport, eps: float) -> bool:
    """Whether the product bound certifies d(t_start, t) <= eps."""
    return theorem_lhs(report) <= 2.0 * eps


def first_certified_time(report: BoundReport, eps: float) -> int | None:
    """Smallest s in the report where the product condition holds."""
    lhs = report.running_product / np.sqrt(report.pi_min * report.pi_min_start)
    hits = np.flatnonzero(lhs <= 2.0 * eps)
    return None if hits.size == 0 else report.t_start + 1 + int(hits[0])


def corollary_F(report: BoundReport, eps: float) -> float:
    """Time threshold F(t); t >= F(t) certifies d(t_start, t) <= eps."""
    th = report.theta_t
    if th <= 0.0:
        raise Unbounded("Theta_t = 0: no contraction certified")
    return corollary_F_value(th, report.pi_min_start, report.pi_min_t, eps)


def corollary_F_value(theta_t: float, pi_min_0: float, pi_min_t: float, eps: float) -> float:
    if theta_t <= 0.0:
        raise Unbounded("Theta_t = 0: no contraction certified")
    return (2.0 / theta_t) * (
        math.log(1.0 / (2.0 * math.sqrt(pi_min_0 * pi_min_t))) + math.log(1.0 / eps)
    )


def psi_varphi_bounds(varphi: float) -> tuple[float, float]:
    """(middle, right) of 1 - psi <= (sqrt(1+2phi)+sqrt(1-2phi))/2 <= 1 - phi^2/2."""
    v = min(max(varphi, -0.5), 0.5)
    return (math.sqrt(1 + 2 * v) + math.sqrt(1 - 2 * v)) / 2.0, 1.0 - v * v / 2.0


def psi_lower_bound(g: float, phi: float) -> float:
    return (g / (1.0 - 0.5 * g)) ** 2 * phi * phi / 8.0

