"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or ``MIXLAB_PURE=1`` is set.
Signatures and return conventions match ``_ckernels`` exactly.
"""

import numpy as np

_CHUNK = 1 << 15


def dobrushin(P):
    P = np.ascontiguousarray(P, dtype=np.float64)
    n = P.shape[0]
    best = 0.0
    for x in range(n - 1):
        tv = 0.5 * np.abs(P[x] - P[x + 1 :]).sum(axis=1)
        m = float(tv.max())
        if m > best:
            best = m
    return best


def bottleneck_min(flow, mass, half):
    """Minimise the normalised cut over nonempty subsets with ``mass <= half``.

    ``flow[x, y]`` is the stationary flow from x to y; the cut of S counts both
    directions.  Returns ``(value, mask)``, ``(inf, 0)`` when no subset qualifies.
    """
    flow = np.asarray(flow, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    n = flow.shape[0]
    W = flow + flow.T
    shifts = np.arange(n, dtype=np.int64)
    best, best_mask = np.inf, 0
    total = 1 << n
    for lo in range(1, total, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        B = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        m = B @ mass
        ok = m <= half
        if not ok.any():
            continue
        B, m, masks = B[ok], m[ok], masks[ok]
        cut = ((B @ W) * (1.0 - B)).sum(axis=1)
        vals = cut / (2.0 * m)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_mask = float(vals[i]), int(masks[i])
    return best, best_mask
