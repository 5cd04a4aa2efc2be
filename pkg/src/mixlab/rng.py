"""Seeded, splittable random substreams.

Every random quantity in the package is drawn from a substream keyed by
``(master seed, module id, time index, trial index)``.  Substreams are
independent Philox counter-based generators, so a job can regenerate the
draws for any time index (including negative ones) without replaying the
stream and results never depend on evaluation order or thread scheduling.
"""

from __future__ import annotations

import numpy as np

MODULE_IDS = {
    "er": 1,
    "evolve": 2,
    "random_chain": 3,
    "check": 4,
    "misc": 5,
}


def _zigzag(k: int) -> int:
    # maps ..., -2, -1, 0, 1, 2, ... onto 3, 1, 0, 2, 4 so negative times get distinct keys
    return 2 * k if k >= 0 else -2 * k - 1


def substream(seed: int, module: str, time: int = 0, trial: int = 0) -> np.random.Generator:
    """Return the generator for one ``(seed, module, time, trial)`` key."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(MODULE_IDS[module], _zigzag(int(time)), int(trial)),
    )
    return np.random.Generator(np.random.Philox(ss))
