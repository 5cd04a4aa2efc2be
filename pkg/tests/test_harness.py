import json
from collections import Counter

import numpy as np
import pytest

from mixlab.chain import ChainSequence, target_series
from mixlab.cli import main, run
from mixlab.dynamic_er import ERParams, er_sequence
from mixlab.evolving import BOUND_REPORT_COLUMNS, bound_report
from mixlab.harness import (
    RunConfig,
    distribution_to_json,
    emit_csv,
    read_csv,
    run_jobs,
    sequence_from_config,
    sequence_to_config,
)

P2 = [[0.75, 0.25], [0.5, 0.5]]


def explicit_cfg(**extra):
    cfg = {"n": 2, "source": "explicit", "matrices": [P2] * 6, "history": P2}
    cfg.update(extra)
    return cfg


def test_empty_records_header_only(tmp_path):
    path = emit_csv([], ("a", "b"), tmp_path / "x.csv")
    assert path.read_bytes() == b"a,b\r\n"


def test_bound_report_columns(tmp_path):
    seq = ChainSequence.constant(P2)
    ts = target_series(seq, 0, 1, tol=1e-14)
    rows = list(bound_report(seq, ts, 1).rows())
    path = emit_csv(rows, BOUND_REPORT_COLUMNS, tmp_path / "b.csv")
    header = path.read_text().splitlines()[0]
    assert header == "s,g_s,phi_star_s,factor_s,running_product,theta_s"


def test_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    recs = [{"k": i, "x": float(v), "tag": f"r,{i}"} for i, v in enumerate(rng.random(50) * 10.0 ** rng.integers(-300, 300, 50))]
    recs.append({"k": 99, "x": 0.1 + 0.2, "tag": 'quote "q"'})
    path = emit_csv(recs, ("k", "x", "tag"), tmp_path / "r.csv")
    back = read_csv(path, {"k": int, "x": float, "tag": str})
    assert back == recs


def test_csv_missing_column(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([{"a": 1}], ("a", "b"), tmp_path / "m.csv")


def test_run_jobs_order():
    assert run_jobs(lambda j: j * j, list(range(10)), threads=3) == [j * j for j in range(10)]


def test_runconfig_roundtrip():
    cfg = RunConfig("er-mix", {"n_grid": [64], "eta": 60}, seed=7, threads=2, out="x.csv")
    assert RunConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_sequence_config_roundtrip():
    seq = sequence_from_config(explicit_cfg())
    again = sequence_from_config(sequence_to_config(seq))
    for t in range(-2, 7):
        assert np.array_equal(seq.matrix(t).rows, again.matrix(t).rows)
    er = er_sequence(ERParams(12, 3.0, seed=5))
    er2 = sequence_from_config(sequence_to_config(er))
    assert np.array_equal(er.matrix(4).rows, er2.matrix(4).rows)
    for key in ("params", "matrices"):
        s = sequence_from_config({"n": 12, "source": "er", key: {"eta": 3.0, "seed": 5}})
        assert np.array_equal(s.matrix(4).rows, er.matrix(4).rows)


def test_sequence_config_errors():
    with pytest.raises(ValueError):
        sequence_from_config({"n": 3, "source": "explicit", "matrices": [P2]})
    with pytest.raises(ValueError):
        sequence_from_config({"n": 2, "source": "bogus"})


def test_distribution_json():
    assert distribution_to_json({3: 0.25, 0: 0.75}) == {"0": 0.75, "3": 0.25}


def test_check_mode_passes(capsys):
    assert run(RunConfig("check", {}, seed=0)) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)


def test_check_flag(tmp_path, capsys):
    assert main(["check", "--seed", "3"]) == 0
    assert "[FAIL]" not in capsys.readouterr().out


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_er_mix_rows_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, {"n_grid": [64, 128], "eta": 60, "eps": 0.25, "seeds": [0, 1], "horizon": 16})
    a, b, c = (str(tmp_path / f"{k}.csv") for k in "abc")
    assert main(["er-mix", "--config", cfg, "--out", a]) == 0
    assert main(["er-mix", "--config", cfg, "--out", b]) == 0
    assert main(["er-mix", "--config", cfg, "--out", c, "--threads", "2"]) == 0
    data = open(a, "rb").read()
    assert data == open(b, "rb").read() == open(c, "rb").read()
    rows = read_csv(a, {"n": int, "seed": int, "t": int, "d_0_t": float, "t_mix_flag": int})
    assert list(rows[0]) == ["n", "seed", "t", "d_0_t", "t_mix_flag"]
    per_t = Counter(r["t"] for r in rows)
    assert set(per_t.values()) == {4}
    assert sum(r["t_mix_flag"] for r in rows) == 4


def test_er_conc_columns(tmp_path):
    cfg = write_cfg(tmp_path, {"n_grid": [32], "eta": 60, "seeds": [0], "horizon": 10})
    out = tmp_path / "c.csv"
    assert main(["er-conc", "--config", cfg, "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "n,seed,t,min_npi,max_npi,connected,degree_event"
    assert len(out.read_text().splitlines()) == 12


@pytest.mark.parametrize("command", ["er-lower", "er-theta", "bounds"])
def test_er_commands_run(tmp_path, command):
    cfg = write_cfg(tmp_path, {"n_grid": [12], "eta": 60, "seeds": [0], "horizon": 3})
    out = tmp_path / "o.csv"
    assert main([command, "--config", cfg, "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) >= 2


@pytest.mark.parametrize("command", ["target", "mix", "evolve", "bottleneck", "bound"])
def test_chain_commands_run(tmp_path, command):
    cfg = write_cfg(tmp_path, explicit_cfg(t=3, t_end=4, eps=0.1, t_max=4, S0=[0], horizon=4, t_from=1, t_to=3))
    out = tmp_path / "o.out"
    assert main([command, "--config", cfg, "--out", str(out), "--seed", "2"]) == 0
    assert out.exists()


def test_evolve_exact_json(tmp_path):
    cfg = write_cfg(tmp_path, explicit_cfg(S0=[0], horizon=3, mode="exact"))
    out = tmp_path / "law.json"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    law = json.loads(out.read_text())
    assert sum(law.values()) == pytest.approx(1.0, abs=1e-12)


def test_bad_config_exit_codes(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["mix", "--config", missing]) == 2
    bad = write_cfg(tmp_path, {"n": 2, "source": "bogus"})
    assert main(["mix", "--config", bad, "--out", str(tmp_path / "m.csv")]) == 1
    ident = write_cfg(tmp_path, {"n": 2, "source": "explicit", "matrices": [[[1, 0], [0, 1]]], "history": [[1, 0], [0, 1]], "max_lookback": 64}, "i.json")
    assert main(["target", "--config", ident, "--out", str(tmp_path / "t.json")]) == 1
    assert "NoContraction" in capsys.readouterr().err


def test_unknown_command():
    with pytest.raises(ValueError):
        run(RunConfig("nope"))
