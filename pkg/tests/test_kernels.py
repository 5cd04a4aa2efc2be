import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixlab import _pykernels, kernels
from mixlab.rng import substream

try:
    from mixlab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


def subset_value(flow, mass, mask):
    n = len(mass)
    S = [x for x in range(n) if mask >> x & 1]
    out = [y for y in range(n) if not mask >> y & 1]
    cut = sum(flow[x, y] + flow[y, x] for x in S for y in out)
    return cut / (2 * sum(mass[x] for x in S))


def brute_min(flow, mass, half):
    vals = [subset_value(flow, mass, m) for m in range(1, 1 << len(mass)) if sum(
        mass[x] for x in range(len(mass)) if m >> x & 1) <= half]
    return min(vals) if vals else np.inf


def random_flow(seed, n):
    rng = substream(seed, "misc")
    P = rng.dirichlet(np.ones(n), size=n)
    pi = rng.dirichlet(np.ones(n))
    return pi[:, None] * P, pi


def test_active_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_backend_selection():
    pure = os.environ.get("MIXLAB_PURE", "") not in ("", "0")
    expected = "cython" if _ckernels is not None and not pure else "python"
    assert kernels.BACKEND == expected


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_dobrushin_known(mod):
    assert mod.dobrushin(np.eye(3)) == 1.0
    assert mod.dobrushin(np.tile([0.2, 0.8], (2, 1))) == 0.0
    assert mod.dobrushin(np.array([[0.75, 0.25], [0.5, 0.5]])) == pytest.approx(0.25, abs=1e-16)


@pytest.mark.parametrize("mod", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def test_bottleneck_no_qualifying_set(mod):
    val, mask = mod.bottleneck_min(np.array([[1.0]]), np.array([1.0]), 0.5)
    assert val == np.inf and mask == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_backends_agree_with_brute_force(n, seed):
    flow, pi = random_flow(seed, n)
    expected = brute_min(flow, pi, 0.5 + 1e-12)
    for mod in BACKENDS:
        val, mask = mod.bottleneck_min(flow, pi, 0.5 + 1e-12)
        assert val == pytest.approx(expected, rel=1e-12, abs=1e-15)
        assert subset_value(flow, pi, mask) == pytest.approx(val, rel=1e-12, abs=1e-15)
        P = flow / pi[:, None]
        assert mod.dobrushin(P) == pytest.approx(_pykernels.dobrushin(P), abs=1e-15)


def test_backends_agree_larger_n():
    flow, pi = random_flow(3, 19)
    a = _pykernels.bottleneck_min(flow, pi, 0.5)
    for mod in BACKENDS:
        b = mod.bottleneck_min(flow, pi, 0.5)
        assert b[0] == pytest.approx(a[0], rel=1e-12)
