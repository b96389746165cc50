# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: point-in-polygon assignment and LISA permutation counts.

Every routine here has a numpy twin in ``_fallback`` that must produce
bit-identical output; keep the floating-point operation order in sync.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline double uniform_at(uint64_t key, uint64_t counter) noexcept nogil:
    return <double>(mix64(key + (counter + 1) * GOLDEN) >> 11) * TWO_M53


def uniform_stream(uint64_t key, uint64_t start, Py_ssize_t count):
    """Draws ``count`` uniforms from stream ``key`` starting at ``start``."""
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(count):
        o[i] = uniform_at(key, start + <uint64_t>i)
    return out


cdef inline bint on_segment(double px, double py, double x1, double y1,
                            double x2, double y2) noexcept nogil:
    cdef double cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if cross != 0.0:
        return False
    if px < (x1 if x1 < x2 else x2) or px > (x2 if x1 < x2 else x1):
        return False
    if py < (y1 if y1 < y2 else y2) or py > (y2 if y1 < y2 else y1):
        return False
    return True


cdef bint zone_covers(Py_ssize_t z, double px, double py,
                      const int64_t[::1] zone_ring_ptr,
                      const int64_t[::1] ring_ptr,
                      const double[::1] vx, const double[::1] vy) noexcept nogil:
    cdef Py_ssize_t r, v, start, stop
    cdef double x1, y1, x2, y2
    cdef bint inside = False
    for r in range(zone_ring_ptr[z], zone_ring_ptr[z + 1]):
        start = ring_ptr[r]
        stop = ring_ptr[r + 1]
        # rings are closed: last vertex repeats the first
        for v in range(start, stop - 1):
            x1 = vx[v]
            y1 = vy[v]
            x2 = vx[v + 1]
            y2 = vy[v + 1]
            if on_segment(px, py, x1, y1, x2, y2):
                return True
            if (y1 > py) != (y2 > py):
                if px < (x2 - x1) * (py - y1) / (y2 - y1) + x1:
                    inside = not inside
    return inside


def assign_indexed(const double[::1] px, const double[::1] py,
                   const int64_t[::1] zone_ring_ptr, const int64_t[::1] ring_ptr,
                   const double[::1] vx, const double[::1] vy,
                   const double[:, ::1] bbox,
                   double gx0, double gy0, double cell, Py_ssize_t nx, Py_ssize_t ny,
                   const int64_t[::1] cell_ptr, const int64_t[::1] cell_zones):
    """Zone index per point (-1 when uncovered) via the uniform grid index.

    ``cell_zones`` lists, per grid cell, zone indices in tie-break order;
    the first covering zone wins.
    """
    cdef Py_ssize_t n = px.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t i, c, cx, cy, k, z
    cdef double x, y, fx, fy
    with nogil:
        for i in range(n):
            x = px[i]
            y = py[i]
            fx = (x - gx0) / cell
            fy = (y - gy0) / cell
            if not (fx >= 0.0 and fy >= 0.0 and fx <= nx and fy <= ny):
                continue
            cx = <Py_ssize_t>fx
            cy = <Py_ssize_t>fy
            if cx == nx:
                cx = nx - 1
            if cy == ny:
                cy = ny - 1
            c = cy * nx + cx
            for k in range(cell_ptr[c], cell_ptr[c + 1]):
                z = cell_zones[k]
                if x < bbox[z, 0] or x > bbox[z, 2] or y < bbox[z, 1] or y > bbox[z, 3]:
                    continue
                if zone_covers(z, x, y, zone_ring_ptr, ring_ptr, vx, vy):
                    o[i] = z
                    break
    return out


def lisa_extreme_counts(const double[::1] z, const int64_t[::1] indptr,
                        const int64_t[::1] indices, const double[::1] weights,
                        double m2, Py_ssize_t permutations,
                        const uint64_t[::1] keys, Py_ssize_t start, Py_ssize_t stop,
                        int64_t[::1] counts, double[::1] observed):
    """Conditional-permutation tallies for zones ``start <= i < stop``.

    For zone i, each permutation draws its k_i neighbour values without
    replacement from the other n - 1 zones (partial Fisher-Yates driven by
    the counter stream ``keys[i]``). ``counts[i]`` receives the number of
    permutations at least as extreme as the observed local statistic, in
    the direction of its sign. Runs without the GIL.
    """
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t m = n - 1
    cdef int32_t *scratch = <int32_t *> malloc(m * sizeof(int32_t)) if m > 0 else NULL
    cdef Py_ssize_t *picked
    cdef Py_ssize_t i, p, t, k, r, j, kmax = 0, base
    cdef int32_t tmp
    cdef double zi, lag, obs, sim, scale
    cdef int64_t cnt
    cdef uint64_t key, ctr
    for i in range(start, stop):
        if indptr[i + 1] - indptr[i] > kmax:
            kmax = indptr[i + 1] - indptr[i]
    picked = <Py_ssize_t *> malloc((kmax + 1) * sizeof(Py_ssize_t))
    if (m > 0 and scratch == NULL) or picked == NULL:
        free(scratch)
        free(picked)
        raise MemoryError()
    try:
        with nogil:
            for t in range(m):
                scratch[t] = <int32_t>t
            for i in range(start, stop):
                base = indptr[i]
                k = indptr[i + 1] - base
                zi = z[i]
                scale = zi / m2
                lag = 0.0
                for t in range(k):
                    lag = lag + weights[base + t] * z[indices[base + t]]
                obs = scale * lag
                observed[i] = obs
                if k == 0:
                    counts[i] = -1
                    continue
                key = keys[i]
                cnt = 0
                for p in range(permutations):
                    lag = 0.0
                    ctr = <uint64_t>(p * k)
                    for t in range(k):
                        r = t + <Py_ssize_t>(uniform_at(key, ctr + <uint64_t>t) * <double>(m - t))
                        tmp = scratch[t]
                        scratch[t] = scratch[r]
                        scratch[r] = tmp
                        picked[t] = r
                        j = scratch[t]
                        if j >= i:
                            j = j + 1
                        lag = lag + weights[base + t] * z[j]
                    for t in range(k):
                        scratch[t] = <int32_t>t
                        scratch[picked[t]] = <int32_t>picked[t]
                    sim = scale * lag
                    if obs >= 0.0:
                        if sim >= obs:
                            cnt = cnt + 1
                    else:
                        if sim <= obs:
                            cnt = cnt + 1
                counts[i] = cnt
    finally:
        free(scratch)
        free(picked)
