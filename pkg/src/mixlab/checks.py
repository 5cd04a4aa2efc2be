"""Registry of property checks run on seeded random chains.

Each check takes a seed and size knobs and returns a ``CheckResult``.  The
defaults in ``REGISTRY`` are the small bundled fixtures used by
``mix-lab check``; the test suite calls the same functions at full size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from mixlab.chain import (
    ChainSequence,
    StochasticMatrix,
    distance_to_target,
    dobrushin,
    iter_products,
    linear_stationary,
    random_lazy,
    random_lazy_sequence,
    random_stochastic,
    row_distances,
    target_distribution,
    target_series,
)
from mixlab.evolving import (
    SubsetState,
    bound_report,
    first_certified_time,
    iter_subset_laws,
    laziness_factor,
    psi_varphi_bounds,
    psi_lower_bound,
    mask_mass,
    membership_marginals,
    set_functionals,
    stationary_flow,
    step_kernel,
)
from mixlab.rng import substream

TIGHT = 1e-12


@dataclass
class CheckResult:
    name: str
    cases: int
    violations: int
    worst: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.cases} cases, {self.violations} violations, worst excess {self.worst:.3e}{extra}"


class _Tally:
    def __init__(self, name, tol):
        self.name, self.tol = name, tol
        self.cases = self.violations = 0
        self.worst = -math.inf

    def excess(self, value: float):
        """Record one case whose constraint is ``value <= 0`` up to the tolerance."""
        self.cases += 1
        self.worst = max(self.worst, value)
        if value > self.tol:
            self.violations += 1

    def result(self, detail="") -> CheckResult:
        return CheckResult(self.name, self.cases, self.violations, self.worst, detail)


def _sizes(seed: int, count: int, n_min: int, n_max: int) -> list[int]:
    rng = substream(seed, "check", 0, 0)
    return [int(v) for v in rng.integers(n_min, n_max + 1, size=count)]


def check_submultiplicativity(seed: int = 0, pairs: int = 1000, n_max: int = 10) -> CheckResult:
    tally = _Tally("dobrushin submultiplicativity", TIGHT)
    for i, n in enumerate(_sizes(seed, pairs, 2, n_max)):
        rng = substream(seed, "check", 1, i)
        # mix of dense and sparse rows so delta spans (0, 1]
        alpha = float(rng.choice([0.1, 0.5, 1.0, 5.0]))
        P = random_stochastic(rng, n, alpha)
        Q = random_stochastic(rng, n, alpha)
        tally.excess(dobrushin(P @ Q) - dobrushin(P) * dobrushin(Q))
    return tally.result()


def check_static_recovery(seed: int = 0, chains: int = 100, n_max: int = 16, tol: float = 1e-10) -> CheckResult:
    tally = _Tally("constant sequence recovers pi P = pi", tol)
    for i, n in enumerate(_sizes(seed, chains, 2, n_max)):
        P = StochasticMatrix(random_lazy(substream(seed, "check", 2, i), n))
        res = target_distribution(ChainSequence.constant(P), 0, tol=1e-13)
        tally.excess(float(np.abs(res.distribution.mass - linear_stationary(P)).max()))
    return tally.result()


def check_distance_properties(seed: int = 0, sequences: int = 200, n_max: int = 8, horizon: int = 12) -> list[CheckResult]:
    """Invariance of the targets, monotonicity of d in both arguments, and the Dobrushin sandwich."""
    inv = _Tally("target invariance pi_t = pi_r P^{r,t}", 1e-10)
    mono = _Tally("d(u,t) <= d(u,s)", TIGHT)
    mono_b = _Tally("d(u,t) <= d(s,t)", TIGHT)
    sand = _Tally("d(s,t) <= delta(P^{s,t}) <= 2 d(s,t)", TIGHT)
    for i, n in enumerate(_sizes(seed, sequences, 2, n_max)):
        seq = random_lazy_sequence(n, seed, trial=1000 + i)
        ts = target_series(seq, 0, horizon, tol=1e-14)
        d = np.full((horizon + 1, horizon + 1), np.nan)
        for u in range(horizon + 1):
            for k, prod in iter_products(seq, u, horizon - u):
                t = u + k
                d[u, t] = float(row_distances(prod, ts.vector(t)).max())
                if k > 0:
                    pushed = ts.vector(u) @ prod
                    inv.excess(float(np.abs(pushed - ts.vector(t)).max()))
                    delta = dobrushin(prod)
                    sand.excess(d[u, t] - delta)
                    sand.excess(delta - 2.0 * d[u, t])
        for u in range(horizon + 1):
            for s in range(u, horizon + 1):
                for t in range(s, horizon + 1):
                    mono.excess(d[u, t] - d[u, s])
                    mono_b.excess(d[u, t] - d[s, t])
    return [inv.result(), mono.result(), mono_b.result(), sand.result()]


def check_half_bound(seed: int = 0, sequences: int = 50, n_max: int = 10, horizon: int = 8) -> CheckResult:
    tally = _Tally("pi_t(x) <= 1/2 for exactly-lazy chains", TIGHT)
    for i, n in enumerate(_sizes(seed, sequences, 2, n_max)):
        seq = random_lazy_sequence(n, seed, trial=2000 + i, exact_half=True)
        ts = target_series(seq, 0, horizon, tol=1e-13)
        tally.excess(float(ts.pis.max()) - 0.5)
    return tally.result()


def check_martingale(seed: int = 0, sequences: int = 50, n_max: int = 8, t_max: int = 6) -> list[CheckResult]:
    """Exact one-step martingale and complement duality of the nested kernels."""
    mart = _Tally("evolving-set martingale", TIGHT)
    dual = _Tally("complement duality of kernels", TIGHT)
    for i, n in enumerate(_sizes(seed, sequences, 2, n_max)):
        seq = random_lazy_sequence(n, seed, trial=3000 + i)
        ts = target_series(seq, 0, t_max, tol=1e-13)
        full = (1 << n) - 1
        for t in range(1, t_max + 1):
            pi_prev, pi = ts.vector(t - 1), ts.vector(t)
            kernels = {m: step_kernel(seq, ts, t, SubsetState(n, m)) for m in range(full + 1)}
            for m, kern in kernels.items():
                mart.excess(abs(kern.expect(lambda T: mask_mass(T, pi)) - mask_mass(m, pi_prev)))
                law = dict(kern.outcomes)
                mirrored = {full ^ T: p for T, p in kernels[full ^ m].outcomes}
                for T in set(law) | set(mirrored):
                    dual.excess(abs(law.get(T, 0.0) - mirrored.get(T, 0.0)))
    return [mart.result(), dual.result()]


def check_transition_identity(seed: int = 0, sequences: int = 25, n_max: int = 8, t_max: int = 6) -> CheckResult:
    tally = _Tally("P^{0,t}(x,y) = pi_t(y)/pi_0(x) P_{x}(y in S_t)", 1e-10)
    for i, n in enumerate(_sizes(seed, sequences, 2, n_max)):
        seq = random_lazy_sequence(n, seed, trial=4000 + i)
        ts = target_series(seq, 0, t_max, tol=1e-13)
        cache: dict = {}
        products = dict(iter_products(seq, 0, t_max))
        for x in range(n):
            for t, law in iter_subset_laws(seq, ts, SubsetState.of(n, [x]), 0, t_max, cache):
                lhs = products[t][x]
                rhs = ts.vector(t) / ts.vector(0)[x] * membership_marginals(law, n)
                tally.excess(float(np.abs(lhs - rhs).max()))
    return tally.result()


def check_set_inequalities(seed: int = 0, sequences: int = 25, n_max: int = 8, steps: int = 2) -> list[CheckResult]:
    """Both inequalities relating psi and varphi, the psi / Phi lower bound, and the laziness ratio bound."""
    one_minus_psi = _Tally("1 - psi <= (sqrt(1+2phi)+sqrt(1-2phi))/2", TIGHT)
    mid_bound = _Tally("(sqrt(1+2phi)+sqrt(1-2phi))/2 <= 1 - phi^2/2", TIGHT)
    psi_floor = _Tally("psi >= (1/8)(g/(1-g/2))^2 Phi^2", TIGHT)
    lazy = _Tally("Q_t(S,y)/pi_t(y) >= g_t/2 for y in S", TIGHT)
    rng_sizes = _sizes(seed, sequences, 2, n_max)
    for i, n in enumerate(rng_sizes):
        seq = random_lazy_sequence(n, seed, trial=5000 + i)
        ts = target_series(seq, 0, steps, tol=1e-13)
        for t in range(1, steps + 1):
            g = laziness_factor(ts, t)
            pi = ts.vector(t)
            for m in range(1, 1 << n):
                S = SubsetState(n, m)
                f = set_functionals(seq, ts, t, S)
                mid, right = psi_varphi_bounds(f.varphi)
                one_minus_psi.excess((1.0 - f.psi) - mid)
                mid_bound.excess(mid - right)
                psi_floor.excess(psi_lower_bound(g, f.phi) - f.psi)
                ratios = stationary_flow(ts, seq, t, S).values / pi
                lazy.excess(float((0.5 * g - ratios[S.indicator]).max()))
    return [one_minus_psi.result(), mid_bound.result(), psi_floor.result(), lazy.result()]


def check_product_condition(seed: int = 0, sequences: int = 100, n_max: int = 8, eps: float = 0.1,
                    t_cap: int = 20000) -> CheckResult:
    """At the first t where the product condition holds, the exact distance is at most eps."""
    tally = _Tally(f"product condition => d(0,t) <= {eps}", TIGHT)
    never = 0
    for i, n in enumerate(_sizes(seed, sequences, 2, n_max)):
        seq = random_lazy_sequence(n, seed, trial=6000 + i)
        t_hit = None
        span = 256
        while t_hit is None and span <= t_cap:
            ts = target_series(seq, 0, span, tol=1e-13)
            t_hit = first_certified_time(bound_report(seq, ts, span), eps)
            span *= 2
        if t_hit is None:
            never += 1
            continue
        tally.excess(distance_to_target(seq, 0, t_hit, ts) - eps)
    return tally.result(f"{never} sequences never certified within {t_cap}" if never else "")


def check_determinism(seed: int = 0, n: int = 6, horizon: int = 10) -> CheckResult:
    tally = _Tally("identical seeds give identical targets", 0.0)
    a = target_series(random_lazy_sequence(n, seed, 7000), 0, horizon)
    b = target_series(random_lazy_sequence(n, seed, 7000), 0, horizon)
    tally.excess(0.0 if a.pis.tobytes() == b.pis.tobytes() and a.lookback == b.lookback else 1.0)
    return tally.result()


REGISTRY: dict[str, Callable[..., object]] = {
    "submultiplicativity": lambda seed: check_submultiplicativity(seed, pairs=200),
    "static_recovery": lambda seed: check_static_recovery(seed, chains=20),
    "distance_properties": lambda seed: check_distance_properties(seed, sequences=10, horizon=8),
    "half_bound": lambda seed: check_half_bound(seed, sequences=10),
    "martingale": lambda seed: check_martingale(seed, sequences=5, n_max=6, t_max=3),
    "transition_identity": lambda seed: check_transition_identity(seed, sequences=3, n_max=6, t_max=4),
    "set_inequalities": lambda seed: check_set_inequalities(seed, sequences=4, n_max=6, steps=1),
    "product_condition": lambda seed: check_product_condition(seed, sequences=5, n_max=5),
    "determinism": lambda seed: check_determinism(seed),
}


def run_registry(seed: int = 0, names=None) -> list[CheckResult]:
    out: list[CheckResult] = []
    for name, fn in REGISTRY.items():
        if names and name not in names:
            continue
        res = fn(seed)
        out.extend(res if isinstance(res, list) else [res])
    return out
