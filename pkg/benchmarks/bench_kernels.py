"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from mixlab import _pykernels

try:
    from mixlab import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    for n in (8, 64, 256, 512):
        P = rng.dirichlet(np.ones(n), size=n)
        yield f"dobrushin n={n}", "dobrushin", (P,)
    for n in (10, 14, 18):
        P = rng.dirichlet(np.ones(n), size=n)
        pi = rng.dirichlet(np.ones(n))
        yield f"bottleneck n={n}", "bottleneck_min", (pi[:, None] * P, pi, 0.5)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'case':<20}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for label, name, call_args in cases(rng):
        fns = {"numpy": getattr(_pykernels, name)}
        if _ckernels is not None:
            fns["cython"] = getattr(_ckernels, name)
        times = {}
        for k, fn in fns.items():
            number = 1
            times[k] = min(timeit.repeat(lambda: fn(*call_args), number=number, repeat=args.repeat)) * 1e3
        a = fns["numpy"](*call_args)
        if "cython" in fns:
            b = fns["cython"](*call_args)
            va, vb = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
            assert abs(va - vb) <= 1e-12 * max(1.0, abs(va)), (label, va, vb)
            print(f"{label:<20}{times['numpy']:>12.3f}{times['cython']:>13.3f}{times['numpy'] / times['cython']:>8.1f}x")
        else:
            print(f"{label:<20}{times['numpy']:>12.3f}{'n/a':>13}{'':>9}")


if __name__ == "__main__":
    main()
