import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixlab.chain import target_series
from mixlab.dynamic_er import (
    ALPHA1_STAR,
    ALPHA2_STAR,
    ERParams,
    GraphSnapshot,
    degree_constants,
    envelope_check,
    envelope_schedule,
    er_sequence,
    lazy_walk_matrix,
    lower_bound_steps,
    mix_run,
    mixing_experiment,
    reachable_growth,
    sample_snapshot,
    snapshot_events,
    tail_bounds,
    theta_constant,
    theta_run,
)


def graph(n, edges):
    a = np.zeros((n, n), dtype=bool)
    for x, y in edges:
        a[x, y] = a[y, x] = True
    return GraphSnapshot(a)


def test_params():
    p = ERParams(64, 60)
    assert p.p_raw == pytest.approx(60 * math.log(64) / 63)
    assert p.p == 1.0 and p.p_clamped and p.in_regime
    assert not ERParams(512, 60).p_clamped
    assert not ERParams(512, 50).in_regime
    with pytest.raises(ValueError):
        ERParams(1, 60)


def test_huge_eta_gives_complete_graph():
    g = sample_snapshot(ERParams(20, 1e6, seed=3), 5)
    assert g.edge_count == 20 * 19 // 2


def test_snapshot_deterministic():
    p = ERParams(50, 2.0, seed=11)
    assert np.array_equal(sample_snapshot(p, 7).adjacency, sample_snapshot(p, 7).adjacency)
    assert not np.array_equal(sample_snapshot(p, 7).adjacency, sample_snapshot(p, 8).adjacency)


def test_edge_count_binomial_mean():
    n, draws = 30, 10_000
    params = ERParams(n, 1.0, seed=2)
    total = sum(sample_snapshot(params, t).edge_count for t in range(draws))
    pairs = n * (n - 1) // 2 * draws
    mean = pairs * params.p
    sigma = math.sqrt(pairs * params.p * (1 - params.p))
    assert abs(total - mean) <= 4 * sigma


def test_degree_law_time_invariant():
    # pooled degrees at two distant times agree within sampling error
    n, seeds = 64, 200
    deg_a = np.concatenate([sample_snapshot(ERParams(n, 2.0, s), -40).degrees for s in range(seeds)])
    deg_b = np.concatenate([sample_snapshot(ERParams(n, 2.0, s), 900).degrees for s in range(seeds)])
    p = ERParams(n, 2.0).p
    sd = math.sqrt((n - 1) * p * (1 - p))
    # vertices of one graph are dependent through shared edges; bound the error per graph
    assert abs(deg_a.mean() - deg_b.mean()) <= 4 * sd * math.sqrt(2 / seeds)


def test_walk_isolated_vertex():
    P = lazy_walk_matrix(graph(3, [(0, 1)])).rows
    assert P[2].tolist() == [0.0, 0.0, 1.0]


def test_walk_single_edge():
    assert lazy_walk_matrix(graph(2, [(0, 1)])).rows.tolist() == [[0.5, 0.5], [0.5, 0.5]]


def test_walk_star_center():
    d = 5
    P = lazy_walk_matrix(graph(d + 1, [(0, k) for k in range(1, d + 1)])).rows
    assert np.allclose(P[0, 1:], 1 / (2 * d))
    assert P[0, 0] == 0.5
    assert np.allclose(P[1, [0, 1]], 0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.floats(0.1, 5.0), st.integers(0, 2**31), st.integers(-50, 50))
def test_every_walk_is_lazy(n, eta, seed, t):
    assert lazy_walk_matrix(sample_snapshot(ERParams(n, eta, seed), t)).lazy


def test_events_examples():
    n = 8
    full = graph(n, [(x, y) for x in range(n) for y in range(x + 1, n)])
    assert snapshot_events(full, 1.0).connected
    iso = graph(n, [(x, y) for x in range(n - 1) for y in range(x + 1, n - 1)])
    ev = snapshot_events(iso, 1.0)
    assert not ev.connected and not ev.degree_event


@pytest.mark.slow
def test_degree_event_frequency_n256():
    n, eta, draws = 256, 60.0, 1000
    params = ERParams(n, eta, seed=0)
    bound = tail_bounds(n, eta).degree_event_union
    misses = sum(not snapshot_events(sample_snapshot(params, t), eta).degree_event for t in range(draws))
    assert misses / draws <= bound


def test_tail_exponent_eta50():
    tb = tail_bounds(256, 50.0)
    assert tb.degree_upper_exponent == pytest.approx(-50 + 100 * (1 - math.log(2)), rel=1e-15)
    assert tb.degree_upper_exponent == pytest.approx(-19.31, abs=5e-3)
    assert tb.connectivity_exponent == -21.0
    assert tb.connectivity == pytest.approx(256.0 ** -21)


def test_tail_bounds_decrease_in_eta():
    for n in (64, 256, 1024):
        prev = None
        for eta in (20, 40, 60, 80, 120):
            tb = tail_bounds(n, eta)
            cur = (tb.degree_upper, tb.degree_lower, tb.connectivity)
            if prev is not None:
                assert all(c < p for c, p in zip(cur, prev))
            prev = cur


def test_degree_constants():
    c1, c2 = degree_constants(21.0)
    assert (c1, c2) == (11.0, 42.0)


def test_schedule_early_phase():
    sch = envelope_schedule(16, 60.0)
    t1 = math.floor(16 ** 1.1)
    assert sch.t1 == t1
    assert (sch.alpha2[: t1 + 1] == 8.0).all()
    assert (sch.alpha1[: t1 + 1] == 0.0).all()
    assert sch.alpha2[-1] == ALPHA2_STAR and sch.alpha1[-1] == ALPHA1_STAR
    assert np.all(np.diff(sch.alpha2) <= 0)
    assert sch.alpha1[t1 + 1] == pytest.approx(math.exp(sch.log_alpha1_phase2), rel=1e-12)
    assert sch.log_alpha1_phase2 == pytest.approx(math.log(16) - 15 * math.log(16 * 60 * math.log(16)))


def test_path_count_value_underflows_at_moderate_n():
    sch = envelope_schedule(256, 60.0)
    assert sch.alpha1[sch.t1 + 1] == 0.0
    assert math.isfinite(sch.log_alpha1_phase2)


def test_envelope_early_phase_holds():
    params = ERParams(24, 3.0, seed=1)
    seq = er_sequence(params)
    ts = target_series(seq, 0, 30, tol=1e-8)
    sch = envelope_schedule(24, 3.0)
    assert envelope_check(ts, sch, range(0, 31)) == []


@pytest.mark.slow
def test_plateau_bracket_n256():
    n, eta = 256, 60.0
    for seed in range(5):
        ts = target_series(er_sequence(ERParams(n, eta, seed), cache_size=4), 0, 2 * n, tol=1e-6)
        assert envelope_check(ts, None, range(0, 2 * n + 1), bracket=(ALPHA1_STAR, ALPHA2_STAR)) == []


def test_reachable_complete():
    g = reachable_growth(ERParams(10, 1e6), 0, 2)
    assert g.sizes == (1, 10, 10)


def test_reachable_monotone_and_growth_bound():
    n, eta = 200, 1.0
    params = ERParams(n, eta, seed=4)
    g = reachable_growth(params, 3, 6)
    assert all(a <= b for a, b in zip(g.sizes, g.sizes[1:]))
    _, c2 = degree_constants(eta)
    all_d = all(snapshot_events(sample_snapshot(params, k), eta).degree_event for k in range(1, 7))
    if all_d:
        assert all(s <= (c2 * math.log(n) + 1) ** k for k, s in enumerate(g.sizes))
    # max degree controls growth regardless of the event
    for k in range(1, 7):
        dmax = max(int(sample_snapshot(params, j).degrees.max()) for j in range(1, k + 1))
        assert g.sizes[k] <= (dmax + 1) ** k


def test_lower_bound_n512():
    n, eta = 512, 60.0
    formula = math.log(n / (2 * ALPHA2_STAR)) / math.log(1 + 2 * eta * math.log(n))
    assert lower_bound_steps(n, eta) == pytest.approx(formula, rel=1e-15)
    g = reachable_growth(ERParams(n, eta, seed=0), 0, 3)
    assert g.certified_steps >= formula


def test_theta_constant_arithmetic():
    a1, a2 = Fraction(2, 1000), Fraction(7)
    exact = (a1 / (2 * a2 - a1) * a1 / (32 * a2 ** 2)) ** 2
    assert theta_constant() == pytest.approx(float(exact), rel=1e-14)
    assert theta_constant() == pytest.approx(3.32e-20, rel=1e-3)


def test_theta_disconnected_flagged():
    run = theta_run(10, 0.4, seed=3, horizon=12, tol=1e-8, max_lookback=1 << 14)
    assert not run.all_connected
    first = int(np.flatnonzero(~run.connected)[0])
    assert (run.theta[first:] == 0).all()
    assert (run.phi_star[~run.connected] == 0).all()


def test_theta_n12_positive():
    run = theta_run(12, 60.0, seed=0, horizon=8)
    assert run.all_connected
    assert (run.theta > 1e-6).all()


def test_mix_eps_monotone_and_deterministic():
    a = mixing_experiment([64], 60.0, 0.25, [0, 1], horizon=16)
    b = mixing_experiment([64], 60.0, 0.25, [0, 1], horizon=16)
    for ra, rb in zip(a, b):
        assert ra.t_mix == rb.t_mix
        assert ra.distances.tobytes() == rb.distances.tobytes()
    loose = mixing_experiment([64], 60.0, 0.9, [0, 1], horizon=16)
    assert all(l.t_mix < r.t_mix for l, r in zip(loose, a))


def test_mix_run_min_steps():
    r = mix_run(64, 60.0, 0.25, 0, horizon=16, min_steps=6)
    assert len(r.distances) == 7
    assert r.distances[r.t_mix] <= 0.25
