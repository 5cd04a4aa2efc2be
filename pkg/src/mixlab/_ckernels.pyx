# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Dobrushin coefficient and exhaustive bottleneck scan."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def dobrushin(P):
    cdef const double[:, ::1] A = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], x, y, z
    cdef double best = 0.0, s
    with nogil:
        for x in range(n - 1):
            for y in range(x + 1, n):
                s = 0.0
                for z in range(n):
                    s += fabs(A[x, z] - A[y, z])
                s *= 0.5
                if s > best:
                    best = s
    return best


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil

cdef enum:
    RESYNC = 4096


cdef void _resync(const double[:, ::1] W, const double[::1] pi, unsigned long long mask, Py_ssize_t n,
                  double[::1] inside, double[::1] deg, double* m, double* cut) noexcept nogil:
    cdef Py_ssize_t x, y
    m[0] = 0.0
    cut[0] = 0.0
    for x in range(n):
        inside[x] = 0.0
        for y in range(n):
            if (mask >> y) & 1:
                inside[x] += W[x, y]
    for x in range(n):
        if (mask >> x) & 1:
            m[0] += pi[x]
            cut[0] += deg[x] - inside[x]


def bottleneck_min(flow, mass, double half):
    """Gray-code scan of all nonempty subsets; O(n) update per subset.

    Running sums are recomputed from scratch every RESYNC steps and the
    winning value is recomputed exactly, so rounding drift stays negligible.
    """
    cdef const double[::1] pi = np.ascontiguousarray(mass, dtype=np.float64)
    cdef Py_ssize_t n = pi.shape[0]
    if n > 30:
        raise ValueError("exhaustive scan limited to n <= 30")
    Wnp = np.asarray(flow, dtype=np.float64)
    Wnp = np.ascontiguousarray(Wnp + Wnp.T)
    np.fill_diagonal(Wnp, 0.0)
    cdef const double[:, ::1] W = Wnp
    cdef double[::1] deg = np.ascontiguousarray(Wnp.sum(axis=1))
    cdef double[::1] inside = np.zeros(max(n, 1))
    cdef unsigned long long k, g = 0, total = 1ULL << n, best_mask = 0
    cdef double best = INFINITY, m = 0.0, cut = 0.0, val, sign
    cdef Py_ssize_t v, y
    with nogil:
        for k in range(1, total):
            v = __builtin_ctzll(k)
            g ^= 1ULL << v
            if k % RESYNC == 0:
                _resync(W, pi, g, n, inside, deg, &m, &cut)
            else:
                sign = 1.0 if (g >> v) & 1 else -1.0
                cut += sign * (deg[v] - 2.0 * inside[v])
                m += sign * pi[v]
                for y in range(n):
                    inside[y] += sign * W[y, v]
            if m > half or m <= 0.0:
                continue
            val = cut / (2.0 * m)
            if val < best:
                best = val
                best_mask = g
        if best_mask != 0:
            _resync(W, pi, best_mask, n, inside, deg, &m, &cut)
            best = cut / (2.0 * m)
    return best, int(best_mask)
