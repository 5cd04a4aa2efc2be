"""Run configuration, job execution and artifact emission."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from mixlab.chain import ChainSequence, StochasticMatrix


def run_jobs(fn: Callable, jobs: Sequence, threads: int = 1) -> list:
    """Apply ``fn`` to every job; results come back in job order whatever the thread count."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, jobs))


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def emit_csv(records: Iterable[dict], schema: Sequence[str], path) -> Path:
    """Write records with a header row; floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(schema)
        for rec in records:
            missing = [c for c in schema if c not in rec]
            if missing:
                raise ValueError(f"record lacks columns {missing}")
            w.writerow([format_value(rec[c]) for c in schema])
    return path


def read_csv(path, types: dict[str, type] | None = None) -> list[dict]:
    """Parse a file written by ``emit_csv``; ``types`` maps column -> int/float/str."""
    types = types or {}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        rec = {}
        for k, v in row.items():
            typ = types.get(k)
            if typ is None:
                rec[k] = v
            elif v == "":
                rec[k] = None
            else:
                rec[k] = typ(v)
        out.append(rec)
    return out


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def distribution_to_json(law: dict[int, float]) -> dict[str, float]:
    """Exact subset law as ``{bitmask: probability}`` with decimal bitmask keys."""
    return {str(mask): float(p) for mask, p in sorted(law.items())}


def sequence_from_config(cfg: dict) -> ChainSequence:
    """Build a chain sequence from its JSON config.

    ``{"n": 2, "source": "explicit", "matrices": [[[...]], ...], "start": 1, "history": [[...]]}``
    or ``{"n": 64, "source": "er", "matrices": {"eta": 60, "seed": 1}}``; for the
    ER form the parameters may also sit under ``"params"`` or at top level.
    """
    from mixlab.dynamic_er import ERParams, er_sequence

    n = int(cfg["n"])
    src = cfg.get("source", "explicit")
    if src == "explicit":
        mats = [StochasticMatrix.from_json(m) for m in cfg["matrices"]]
        hist = cfg.get("history")
        seq = ChainSequence.explicit(
            mats, start=int(cfg.get("start", 1)),
            history=StochasticMatrix.from_json(hist) if hist is not None else None,
        )
    elif src == "er":
        params = cfg.get("params") or cfg.get("matrices") or cfg
        seq = er_sequence(ERParams(n, float(params["eta"]), int(params.get("seed", 0))))
    else:
        raise ValueError(f"unknown source {src!r}")
    if seq.n != n:
        raise ValueError(f"config declares n={n}, matrices have n={seq.n}")
    return seq


def sequence_to_config(seq: ChainSequence) -> dict:
    src = seq.source
    if src.get("kind") == "explicit":
        cfg = {
            "n": seq.n,
            "source": "explicit",
            "start": src["start"],
            "matrices": [m.to_json() for m in src["matrices"]],
        }
        if src.get("history") is not None:
            cfg["history"] = src["history"].to_json()
        return cfg
    if src.get("kind") == "er":
        return {"n": seq.n, "source": "er", "matrices": {"eta": src["eta"], "seed": src["seed"]}}
    raise ValueError(f"sequence of kind {src.get('kind')!r} has no config form")


@dataclass
class RunConfig:
    command: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: str | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        return cls(
            command=obj["command"],
            params=dict(obj.get("params", {})),
            seed=int(obj.get("seed", 0)),
            threads=int(obj.get("threads", 1)),
            out=obj.get("out"),
        )
