"""Lazy random walks on independently resampled Erdos-Renyi graphs.

The graph at time t is G(n, p) with ``p = eta * log(n) / (n - 1)``, drawn
from the substream for ``(seed, t)``; negative times are valid so target
distributions can be certified by looking back.  When the formula exceeds 1
(small n at large eta) p is clamped to 1 and the graph is complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from mixlab.chain import (
    ChainSequence,
    StochasticMatrix,
    TargetSeries,
    iter_products,
    row_distances,
    target_series,
)
from mixlab.errors import NotMixed
from mixlab.evolving import bottleneck_star, bottleneck_term, laziness_factor
from mixlab.rng import substream

BETA = 0.3
ALPHA1_STAR = 0.002
ALPHA2_STAR = 7.0
SCHEDULE_EPS = 1e-4
REGIME_ETA_MIN = 50.0


def degree_constants(eta: float) -> tuple[float, float]:
    """(c1, c2) = (11/21 eta, 2 eta)."""
    return 11.0 / 21.0 * eta, 2.0 * eta


@dataclass(frozen=True)
class ERParams:
    n: int
    eta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def p_raw(self) -> float:
        return self.eta * math.log(self.n) / (self.n - 1)

    @property
    def p(self) -> float:
        return min(1.0, self.p_raw)

    @property
    def p_clamped(self) -> bool:
        return self.p_raw >= 1.0

    @property
    def in_regime(self) -> bool:
        return self.eta > REGIME_ETA_MIN


@dataclass(frozen=True, eq=False)
class GraphSnapshot:
    adjacency: np.ndarray = field(repr=False)
    t: int = 0

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if (a != a.T).any():
            raise ValueError("adjacency must be symmetric")
        if a.diagonal().any():
            raise ValueError("self-loops are not allowed")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def sample_snapshot(params: ERParams, t: int) -> GraphSnapshot:
    n = params.n
    rng = substream(params.seed, "er", t)
    iu = np.triu_indices(n, k=1)
    present = rng.random(iu[0].size) < params.p
    a = np.zeros((n, n), dtype=bool)
    a[iu[0][present], iu[1][present]] = True
    a |= a.T
    return GraphSnapshot(a, t)


def lazy_walk_matrix(g: GraphSnapshot) -> StochasticMatrix:
    A = g.adjacency.astype(np.float64)
    deg = A.sum(axis=1)
    P = np.zeros_like(A)
    has = deg > 0
    P[has] = A[has] / (2.0 * deg[has, None])
    P[np.diag_indices(g.n)] = np.where(has, 0.5, 1.0)
    return StochasticMatrix(P)


def is_connected(g: GraphSnapshot) -> bool:
    return connected_components(g.adjacency, directed=False, return_labels=False) == 1


@dataclass(frozen=True)
class SnapshotEvents:
    degree_event: bool
    connected: bool


def snapshot_events(g: GraphSnapshot, eta: float) -> SnapshotEvents:
    c1, c2 = degree_constants(eta)
    logn = math.log(g.n)
    deg = g.degrees
    ok = bool(((deg >= c1 * logn) & (deg <= c2 * logn)).all())
    return SnapshotEvents(ok, is_connected(g))


def er_sequence(params: ERParams, cache_size: int = 64) -> ChainSequence:
    """Environment-backed chain sequence of lazy walks on the dynamic graph."""
    return ChainSequence.from_sampler(
        params.n,
        lambda t: lazy_walk_matrix(sample_snapshot(params, t)),
        source={"kind": "er", "eta": params.eta, "seed": params.seed},
        cache_size=cache_size,
    )


@dataclass(frozen=True)
class TailBounds:
    """Closed-form tail bounds with their exponents base n."""

    n: int
    eta: float
    degree_upper_exponent: float
    degree_lower_exponent: float
    connectivity_exponent: float
    single_connectivity_exponent: float

    @property
    def degree_upper(self) -> float:
        """Per-vertex P(deg >= c2 log n)."""
        return self.n ** self.degree_upper_exponent

    @property
    def degree_lower(self) -> float:
        """Per-vertex P(deg <= c1 log n)."""
        return self.n ** self.degree_lower_exponent

    @property
    def connectivity(self) -> float:
        """P(some graph among n^2 consecutive ones is disconnected)."""
        return self.n ** self.connectivity_exponent

    @property
    def single_connectivity(self) -> float:
        """P(one graph is disconnected)."""
        return self.n ** self.single_connectivity_exponent

    @property
    def degree_event_union(self) -> float:
        """Union bound on P(D_t^c) over all n vertices."""
        return self.n * (self.degree_upper + self.degree_lower)

    @property
    def rho(self) -> float:
        """Exponent rho with union bound = n^(-rho)."""
        return -math.log(self.degree_event_union) / math.log(self.n)


def tail_bounds(n: int, eta: float) -> TailBounds:
    if eta <= 0:
        raise ValueError("eta must be positive")
    c1, c2 = degree_constants(eta)
    return TailBounds(
        n,
        eta,
        -eta + c2 * (1.0 - math.log(c2 / eta)),
        -eta + c1 * (1.0 + math.log(eta / c1)),
        -eta / 2.0 + 4.0,
        -eta / 2.0 + 2.0,
    )


@dataclass(frozen=True, eq=False)
class EnvelopeSchedule:
    """Lower/upper envelopes alpha1(t), alpha2(t) for n * pi_t(x), t = 0..n^2.

    Phase boundaries n^1.1, n^1.2 and n^2 - n are rounded down.  The tiny
    pre-plateau lower value is stored as a float and underflows to 0 for
    moderate n; ``log_alpha1_phase2`` keeps its logarithm.
    """

    n: int
    eta: float
    alpha1: np.ndarray = field(repr=False)
    alpha2: np.ndarray = field(repr=False)
    log_alpha1_phase2: float
    t1: int
    t2: int
    t3: int

    def bracket(self, t: int) -> tuple[float, float]:
        return float(self.alpha1[t]), float(self.alpha2[t])


def envelope_schedule(n: int, eta: float, eps: float = SCHEDULE_EPS,
                      alpha1_star: float = ALPHA1_STAR, alpha2_star: float = ALPHA2_STAR) -> EnvelopeSchedule:
    t1 = math.floor(n ** 1.1)
    t2 = math.floor(n ** 1.2)
    t3 = n * n - n
    T = n * n
    log_a1 = math.log(n) - (n - 1) * math.log(16.0 * eta * math.log(n))
    a1_phase2 = math.exp(log_a1)
    a1 = np.empty(T + 1)
    a2 = np.empty(T + 1)
    for t in range(T + 1):
        if t <= t1:
            a2[t] = n / 2.0
        elif t <= t2 and (1 - eps) * a2[t - 1] >= alpha2_star:
            a2[t] = (1 - eps) * a2[t - 1]
        else:
            a2[t] = alpha2_star
        if t <= t1:
            a1[t] = 0.0
        elif t <= t2:
            a1[t] = a1_phase2
        elif t < t3 and (1 + eps) * a1[t - 1] <= alpha1_star:
            a1[t] = (1 + eps) * a1[t - 1]
        else:
            a1[t] = alpha1_star
    a1.setflags(write=False)
    a2.setflags(write=False)
    return EnvelopeSchedule(n, eta, a1, a2, log_a1, t1, t2, t3)


def envelope_check(
    targets: TargetSeries,
    schedule: EnvelopeSchedule | None,
    t_range: range,
    bracket: tuple[float, float] | None = None,
    atol: float = 0.0,
) -> list[tuple[int, int]]:
    """(t, x) pairs with n * pi_t(x) outside the envelope.

    Uses the schedule's bracket at each t, or a fixed ``bracket`` when given
    (e.g. the plateau ``(ALPHA1_STAR, ALPHA2_STAR)``).
    """
    out = []
    for t in t_range:
        v = targets.vector(t) * targets.vector(t).size
        lo, hi = bracket if bracket is not None else schedule.bracket(t)
        for x in np.flatnonzero((v < lo - atol) | (v > hi + atol)):
            out.append((t, int(x)))
    return out


@dataclass(frozen=True)
class Growth:
    sizes: tuple[int, ...]
    certified_k: int
    threshold: float

    @property
    def certified_steps(self) -> int:
        """Lower bound on t_mix(eps) for eps < 1/2: d(0, certified_k) > 1/2."""
        return self.certified_k + 1


def reachable_growth(seq_or_params, x: int, k_max: int, alpha2_star: float = ALPHA2_STAR) -> Growth:
    """Sizes of the sets reachable from x in k = 0..k_max steps starting at time 0.

    ``certified_k`` is the largest k with ``|T_x^k| <= n / (2 alpha2*)`` (-1 if
    even k = 0 fails); when pi_k <= alpha2*/n this gives d(0, k) > 1/2.
    """
    if isinstance(seq_or_params, ERParams):
        params = seq_or_params
        n = params.n
        adj_at = lambda k: sample_snapshot(params, k).adjacency  # noqa: E731
    else:
        seq = seq_or_params
        n = seq.n
        adj_at = lambda k: seq.matrix(k).rows > 0  # noqa: E731
    reach = np.zeros(n, dtype=bool)
    reach[x] = True
    sizes = [1]
    for k in range(1, k_max + 1):
        reach = reach | adj_at(k)[reach].any(axis=0)
        sizes.append(int(reach.sum()))
    threshold = n / (2.0 * alpha2_star)
    certified = -1
    for k, s in enumerate(sizes):
        if s <= threshold:
            certified = k
        else:
            break
    return Growth(tuple(sizes), certified, threshold)


def lower_bound_steps(n: int, eta: float, alpha2_star: float = ALPHA2_STAR) -> float:
    """log(n / (2 alpha2*)) / log(1 + c2 log n)."""
    _, c2 = degree_constants(eta)
    return math.log(n / (2.0 * alpha2_star)) / math.log(1.0 + c2 * math.log(n))


def theta_constant(alpha1_star: float = ALPHA1_STAR, alpha2_star: float = ALPHA2_STAR) -> float:
    return (alpha1_star / (2 * alpha2_star - alpha1_star) * alpha1_star / (32 * alpha2_star ** 2)) ** 2


# experiments


@dataclass
class MixRun:
    n: int
    seed: int
    eps: float
    t_mix: int | None
    distances: np.ndarray
    lower_bound: float
    certified_k: int
    connected: bool
    p_clamped: bool

    @property
    def ratio(self) -> float | None:
        return None if self.t_mix is None else self.t_mix / math.log(self.n)


def mix_run(n: int, eta: float, eps: float, seed: int, horizon: int = 64,
            tol: float = 1e-6, max_lookback: int = 1 << 12, min_steps: int = 0) -> MixRun:
    """Quenched mixing time from time 0 for one environment realisation.

    The scan stops ``horizon`` steps after time 0 at the latest; distances
    are recorded up to the mixing time plus two steps, and at least up to
    ``min_steps``.
    """
    params = ERParams(n, eta, seed)
    seq = er_sequence(params, cache_size=8)
    targets = target_series(seq, 0, horizon, tol=tol, max_lookback=max_lookback)
    dists = []
    t_mix = None
    for k, prod in iter_products(seq, 0, horizon):
        d = float(row_distances(prod, targets.vector(k)).max())
        dists.append(d)
        if t_mix is None and d <= eps:
            t_mix = k
        if t_mix is not None and k >= max(t_mix + 2, min_steps):
            break
    connected = all(is_connected(sample_snapshot(params, k)) for k in range(1, len(dists)))
    growth = reachable_growth(params, 0, max(len(dists) - 1, 0))
    return MixRun(n, seed, eps, t_mix, np.array(dists), lower_bound_steps(n, eta),
                  growth.certified_k, connected, params.p_clamped)


@dataclass
class ConcentrationRun:
    n: int
    seed: int
    min_npi: np.ndarray
    max_npi: np.ndarray
    connected: np.ndarray
    degree_event: np.ndarray
    violations: list

    @property
    def all_connected(self) -> bool:
        return bool(self.connected.all())


def concentration_run(n: int, eta: float, seed: int, t_max: int, tol: float = 1e-6,
                      max_lookback: int = 1 << 12) -> ConcentrationRun:
    params = ERParams(n, eta, seed)
    seq = er_sequence(params, cache_size=4)
    targets = target_series(seq, 0, t_max, tol=tol, max_lookback=max_lookback)
    npi = targets.pis * n
    conn = np.empty(t_max + 1, dtype=bool)
    deg = np.empty(t_max + 1, dtype=bool)
    for t in range(t_max + 1):
        ev = snapshot_events(sample_snapshot(params, t), eta)
        conn[t], deg[t] = ev.connected, ev.degree_event
    viol = envelope_check(targets, None, range(0, t_max + 1), bracket=(ALPHA1_STAR, ALPHA2_STAR))
    return ConcentrationRun(n, seed, npi.min(axis=1), npi.max(axis=1), conn, deg, viol)


@dataclass
class ThetaRun:
    n: int
    seed: int
    phi_star: np.ndarray
    g: np.ndarray
    theta: np.ndarray
    connected: np.ndarray

    @property
    def all_connected(self) -> bool:
        return bool(self.connected.all())


def theta_run(n: int, eta: float, seed: int, horizon: int, tol: float = 1e-9,
              max_lookback: int = 1 << 12) -> ThetaRun:
    params = ERParams(n, eta, seed)
    seq = er_sequence(params, cache_size=4)
    targets = target_series(seq, 0, horizon, tol=tol, max_lookback=max_lookback)
    phi = np.empty(horizon)
    g = np.empty(horizon)
    conn = np.empty(horizon, dtype=bool)
    for i, s in enumerate(range(1, horizon + 1)):
        phi[i] = bottleneck_star(seq, targets, s)
        g[i] = laziness_factor(targets, s)
        conn[i] = is_connected(sample_snapshot(params, s))
    terms = np.array([bottleneck_term(a, b) for a, b in zip(g, phi)])
    return ThetaRun(n, seed, phi, g, np.minimum.accumulate(terms), conn)


def mixing_experiment(n_grid, eta: float, eps: float, seeds, horizon: int = 64,
                      tol: float = 1e-6, max_lookback: int = 1 << 12, threads: int = 1) -> list[MixRun]:
    """One ``MixRun`` per (n, seed), in grid order."""
    from mixlab.harness import run_jobs

    jobs = [(n, s) for n in n_grid for s in seeds]
    runs = run_jobs(lambda job: mix_run(job[0], eta, eps, job[1], horizon, tol, max_lookback), jobs, threads)
    for r in runs:
        if r.t_mix is None:
            raise NotMixed(f"n={r.n} seed={r.seed}: not mixed within {horizon} steps")
    return runs


def ratio_spread(runs: list[MixRun]) -> float:
    """max over n of mean(t_mix / log n) divided by the min over n."""
    by_n: dict[int, list[float]] = {}
    for r in runs:
        by_n.setdefault(r.n, []).append(r.ratio)
    means = [float(np.mean(v)) for v in by_n.values()]
    return max(means) / min(means)
