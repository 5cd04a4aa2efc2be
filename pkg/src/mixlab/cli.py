"""Command-line entry point: ``mix-lab <subcommand> --config cfg.json --out path``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from mixlab import chain, dynamic_er, evolving
from mixlab.checks import run_registry
from mixlab.errors import MixLabError, NotMixed, Unbounded
from mixlab.harness import (
    RunConfig,
    distribution_to_json,
    emit_csv,
    run_jobs,
    sequence_from_config,
    write_json,
)
from mixlab.rng import substream

ER_MIX_COLUMNS = ("n", "seed", "t", "d_0_t", "t_mix_flag")
ER_CONC_COLUMNS = ("n", "seed", "t", "min_npi", "max_npi", "connected", "degree_event")
ER_LOWER_COLUMNS = ("n", "seed", "k", "reachable", "threshold", "certified_k", "formula_bound")
ER_THETA_COLUMNS = ("n", "seed", "t", "phi_star", "g", "theta", "connected")
BOUNDS_COLUMNS = (
    "n", "eta", "p", "p_clamped", "degree_upper_exponent", "degree_lower_exponent",
    "degree_event_union", "rho", "connectivity_exponent", "single_connectivity_exponent",
    "lower_bound_steps", "theta_constant",
)


def _seeds(cfg: RunConfig) -> list[int]:
    p = cfg.params
    if "seeds" in p:
        seeds = p["seeds"]
        return list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    k = int(p.get("n_seeds", 1))
    return [int(substream(cfg.seed, "misc", 0, j).integers(2**62)) for j in range(k)]


def _out(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.out or default)


def _tol(p, default):
    return float(p.get("tol", default)), int(p.get("max_lookback", chain.DEFAULT_MAX_LOOKBACK))


def cmd_target(cfg: RunConfig) -> int:
    p = cfg.params
    seq = sequence_from_config(p["sequence"] if "sequence" in p else p)
    tol, mlb = _tol(p, chain.DEFAULT_TOL)
    t = int(p.get("t", 0))
    t_end = int(p.get("t_end", t))
    ts = chain.target_series(seq, t, t_end, tol, mlb)
    out = {
        "t_start": t,
        "t_end": t_end,
        "delta": ts.delta,
        "lookback": ts.lookback,
        "targets": {str(s): ts[s].to_json() for s in range(t, t_end + 1)},
    }
    write_json(out, _out(cfg, "target.json"))
    print(f"pi_{t}: lookback {ts.lookback}, delta {ts.delta:.3e}")
    return 0


def cmd_mix(cfg: RunConfig) -> int:
    p = cfg.params
    seq = sequence_from_config(p["sequence"] if "sequence" in p else p)
    tol, mlb = _tol(p, chain.DEFAULT_TOL)
    eps = float(p.get("eps", 0.25))
    s = int(p.get("s", 0))
    t_max = int(p.get("t_max", p.get("horizon", 100)))
    ts = chain.target_series(seq, s, s + t_max, tol, mlb)
    records = []
    for k, prod in chain.iter_products(seq, s, t_max):
        records.append({
            "t": s + k,
            "d": float(chain.row_distances(prod, ts.vector(s + k)).max()),
            "dobrushin": chain.dobrushin(prod),
        })
    emit_csv(records, ("t", "d", "dobrushin"), _out(cfg, "mix.csv"))
    summary = {}
    for name, fn in (("t_mix", lambda: chain.mixing_time(seq, eps, s, t_max, ts)),
                     ("t_mix_alt", lambda: chain.mixing_time_alt(seq, eps, s, t_max))):
        try:
            summary[name] = fn()
        except NotMixed:
            summary[name] = None
    print(json.dumps(summary))
    return 0


def cmd_evolve(cfg: RunConfig) -> int:
    p = cfg.params
    seq = sequence_from_config(p["sequence"] if "sequence" in p else p)
    t0 = int(p.get("t0", 0))
    horizon = int(p.get("horizon", 8))
    S0 = evolving.SubsetState.of(seq.n, p["S0"])
    tol, mlb = _tol(p, 1e-12)
    ts = chain.target_series(seq, t0, t0 + horizon, tol, mlb)
    if p.get("mode", "trace") == "exact":
        law = evolving.exact_subset_distribution(seq, ts, S0, t0, t0 + horizon)
        write_json(distribution_to_json(law), _out(cfg, "subsets.json"))
        return 0
    trace = evolving.simulate_trace(seq, ts, S0, t0, horizon, cfg.seed)
    records = [
        {"t": t0 + k, "mask": S.mask, "size": len(S), "pi_mass": S.mass(ts.vector(t0 + k))}
        for k, S in enumerate(trace.states)
    ]
    emit_csv(records, ("t", "mask", "size", "pi_mass"), _out(cfg, "trace.csv"))
    print(json.dumps({"tau": trace.tau}))
    return 0


def cmd_bottleneck(cfg: RunConfig) -> int:
    p = cfg.params
    seq = sequence_from_config(p["sequence"] if "sequence" in p else p)
    t_from = int(p.get("t_from", 1))
    t_to = int(p.get("t_to", t_from))
    tol, mlb = _tol(p, 1e-12)
    ts = chain.target_series(seq, t_from - 1, t_to, tol, mlb)
    exact = seq.n <= evolving.MAX_EXHAUSTIVE_N
    records = []
    for t in range(t_from, t_to + 1):
        if exact:
            val, S = evolving.bottleneck_star(seq, ts, t, return_set=True)
            mask = S.mask
        else:
            val = evolving.bottleneck_sampled(seq, ts, t, int(p.get("samples", 10000)), cfg.seed)
            mask = None
        records.append({"t": t, "phi_star": val, "argmin_mask": mask,
                        "g": evolving.laziness_factor(ts, t), "exact": exact})
    emit_csv(records, ("t", "phi_star", "argmin_mask", "g", "exact"), _out(cfg, "bottleneck.csv"))
    if not exact:
        print("n exceeds the exhaustive limit: phi_star is a sampled upper estimate, not exact")
    return 0


def cmd_bound(cfg: RunConfig) -> int:
    p = cfg.params
    seq = sequence_from_config(p["sequence"] if "sequence" in p else p)
    t_start = int(p.get("t_start", 0))
    t = int(p["t"])
    eps = float(p.get("eps", 0.25))
    tol, mlb = _tol(p, 1e-12)
    ts = chain.target_series(seq, t_start, t, tol, mlb)
    rep = evolving.bound_report(seq, ts, t, t_start)
    emit_csv(rep.rows(), evolving.BOUND_REPORT_COLUMNS, _out(cfg, "bound.csv"))
    try:
        F = evolving.corollary_F(rep, eps)
    except Unbounded:
        F = None
    summary = {
        "theorem_condition": evolving.theorem_condition(rep, eps),
        "first_certified_t": evolving.first_certified_time(rep, eps),
        "theta": rep.theta_t,
        "F": F,
        "d": chain.distance_to_target(seq, t_start, t, ts),
    }
    print(json.dumps(summary))
    return 0


def _grid(p) -> list[int]:
    g = p.get("n_grid", p.get("n", [64]))
    return [int(g)] if isinstance(g, int) else [int(x) for x in g]


def cmd_er_mix(cfg: RunConfig) -> int:
    p = cfg.params
    eta, eps = float(p.get("eta", 60)), float(p.get("eps", 0.25))
    horizon = int(p.get("horizon", 64))
    tol, mlb = _tol(p, 1e-6)
    jobs = [(n, s) for n in _grid(p) for s in _seeds(cfg)]
    runs = run_jobs(lambda j: dynamic_er.mix_run(j[0], eta, eps, j[1], horizon, tol, mlb), jobs, cfg.threads)
    # rescan short runs so every (n, seed) reports the same t range
    t_end = max(len(r.distances) for r in runs) - 1
    runs = [
        r if len(r.distances) == t_end + 1
        else dynamic_er.mix_run(r.n, eta, eps, r.seed, horizon, tol, mlb, min_steps=t_end)
        for r in runs
    ]
    records = []
    for r in runs:
        for t, d in enumerate(r.distances):
            records.append({"n": r.n, "seed": r.seed, "t": t, "d_0_t": float(d),
                            "t_mix_flag": r.t_mix is not None and t == r.t_mix})
    emit_csv(records, ER_MIX_COLUMNS, _out(cfg, "er_mix.csv"))
    unmixed = [(r.n, r.seed) for r in runs if r.t_mix is None]
    for n in _grid(p):
        vals = [r.t_mix for r in runs if r.n == n and r.t_mix is not None]
        if vals:
            print(f"n={n}: t_mix {vals}, mean t_mix/log n = {sum(vals) / len(vals) / math.log(n):.4f}")
    if unmixed:
        print(f"not mixed within {horizon}: {unmixed}", file=sys.stderr)
        return 3
    return 0


def cmd_er_conc(cfg: RunConfig) -> int:
    p = cfg.params
    eta = float(p.get("eta", 60))
    t_max = int(p.get("horizon", 1024))
    tol, mlb = _tol(p, 1e-6)
    jobs = [(n, s) for n in _grid(p) for s in _seeds(cfg)]
    runs = run_jobs(lambda j: dynamic_er.concentration_run(j[0], eta, j[1], t_max, tol, mlb), jobs, cfg.threads)
    records = [
        {"n": r.n, "seed": r.seed, "t": t, "min_npi": float(r.min_npi[t]), "max_npi": float(r.max_npi[t]),
         "connected": bool(r.connected[t]), "degree_event": bool(r.degree_event[t])}
        for r in runs for t in range(t_max + 1)
    ]
    emit_csv(records, ER_CONC_COLUMNS, _out(cfg, "er_conc.csv"))
    bad = sum(len(r.violations) for r in runs if r.all_connected)
    print(f"plateau bracket violations on connected runs: {bad}")
    return 0


def cmd_er_lower(cfg: RunConfig) -> int:
    p = cfg.params
    eta = float(p.get("eta", 60))
    k_max = int(p.get("horizon", 6))
    records = []
    for n in _grid(p):
        bound = dynamic_er.lower_bound_steps(n, eta)
        for s in _seeds(cfg):
            g = dynamic_er.reachable_growth(dynamic_er.ERParams(n, eta, s), int(p.get("x", 0)), k_max)
            for k, size in enumerate(g.sizes):
                records.append({"n": n, "seed": s, "k": k, "reachable": size, "threshold": g.threshold,
                                "certified_k": g.certified_k, "formula_bound": bound})
    emit_csv(records, ER_LOWER_COLUMNS, _out(cfg, "er_lower.csv"))
    return 0


def cmd_er_theta(cfg: RunConfig) -> int:
    p = cfg.params
    eta = float(p.get("eta", 60))
    horizon = int(p.get("horizon", 64))
    tol, mlb = _tol(p, 1e-9)
    jobs = [(n, s) for n in _grid(p) for s in _seeds(cfg)]
    runs = run_jobs(lambda j: dynamic_er.theta_run(j[0], eta, j[1], horizon, tol, mlb), jobs, cfg.threads)
    records = [
        {"n": r.n, "seed": r.seed, "t": t + 1, "phi_star": float(r.phi_star[t]), "g": float(r.g[t]),
         "theta": float(r.theta[t]), "connected": bool(r.connected[t])}
        for r in runs for t in range(horizon)
    ]
    emit_csv(records, ER_THETA_COLUMNS, _out(cfg, "er_theta.csv"))
    const = dynamic_er.theta_constant()
    for r in runs:
        flag = "" if r.all_connected else " (disconnected snapshot)"
        print(f"n={r.n} seed={r.seed}: min Theta = {r.theta[-1]:.4g} vs constant {const:.3g}{flag}")
    return 0


def cmd_bounds(cfg: RunConfig) -> int:
    p = cfg.params
    eta = float(p.get("eta", 60))
    records = []
    for n in _grid(p):
        tb = dynamic_er.tail_bounds(n, eta)
        params = dynamic_er.ERParams(n, eta)
        records.append({
            "n": n, "eta": eta, "p": params.p, "p_clamped": params.p_clamped,
            "degree_upper_exponent": tb.degree_upper_exponent,
            "degree_lower_exponent": tb.degree_lower_exponent,
            "degree_event_union": tb.degree_event_union, "rho": tb.rho,
            "connectivity_exponent": tb.connectivity_exponent,
            "single_connectivity_exponent": tb.single_connectivity_exponent,
            "lower_bound_steps": dynamic_er.lower_bound_steps(n, eta),
            "theta_constant": dynamic_er.theta_constant(),
        })
    emit_csv(records, BOUNDS_COLUMNS, _out(cfg, "bounds.csv"))
    return 0


def cmd_check(cfg: RunConfig) -> int:
    names = cfg.params.get("checks")
    results = run_registry(cfg.seed, names)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "target": cmd_target,
    "mix": cmd_mix,
    "evolve": cmd_evolve,
    "bottleneck": cmd_bottleneck,
    "bound": cmd_bound,
    "er-mix": cmd_er_mix,
    "er-conc": cmd_er_conc,
    "er-lower": cmd_er_lower,
    "er-theta": cmd_er_theta,
    "bounds": cmd_bounds,
    "check": cmd_check,
}


def run(config: RunConfig) -> int:
    """Execute one configured command; returns the process exit status."""
    try:
        fn = COMMANDS[config.command]
    except KeyError:
        raise ValueError(f"unknown command {config.command!r}") from None
    return fn(config)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mix-lab", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--out", help="output path (CSV or JSON depending on command)")
    ap.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--check", action="store_true", help="run the property-check registry instead")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    params = {}
    if args.config:
        try:
            params = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"mix-lab: cannot read config: {exc}", file=sys.stderr)
            return 2
    command = "check" if args.check else args.command
    cfg = RunConfig(command, params, args.seed, args.threads, args.out)
    try:
        return run(cfg)
    except (MixLabError, ValueError, KeyError) as exc:
        print(f"mix-lab {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
