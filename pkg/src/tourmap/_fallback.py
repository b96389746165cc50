"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Outputs match the compiled routines bit for bit: same counter-based random
stream, same partial Fisher-Yates, same left-to-right accumulation order.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 1.0 / 9007199254740992.0


def mix64(x):
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def uniform_at(key, counters):
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(key) + (c + np.uint64(1)) * GOLDEN
        return (mix64(x) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def uniform_stream(key, start, count):
    return uniform_at(key, np.arange(count, dtype=np.uint64) + np.uint64(start))


def _covers(px, py, zone, zone_ring_ptr, ring_ptr, vx, vy):
    """Vectorised even-odd test with boundary inclusion for one zone."""
    inside = np.zeros(px.shape, dtype=bool)
    edge = np.zeros(px.shape, dtype=bool)
    for r in range(zone_ring_ptr[zone], zone_ring_ptr[zone + 1]):
        for v in range(ring_ptr[r], ring_ptr[r + 1] - 1):
            x1, y1, x2, y2 = vx[v], vy[v], vx[v + 1], vy[v + 1]
            cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
            edge |= (
                (cross == 0.0)
                & (px >= min(x1, x2)) & (px <= max(x1, x2))
                & (py >= min(y1, y2)) & (py <= max(y1, y2))
            )
            straddle = (y1 > py) != (y2 > py)
            if straddle.any():
                with np.errstate(divide="ignore", invalid="ignore"):
                    xcross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
                inside ^= straddle & (px < xcross)
    return inside | edge


def assign_indexed(px, py, zone_ring_ptr, ring_ptr, vx, vy, bbox,
                   gx0, gy0, cell, nx, ny, cell_ptr, cell_zones):
    n = px.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    fx = (px - gx0) / cell
    fy = (py - gy0) / cell
    ok = (fx >= 0.0) & (fy >= 0.0) & (fx <= nx) & (fy <= ny)
    cx = np.minimum(np.where(ok, fx, 0.0).astype(np.int64), nx - 1)
    cy = np.minimum(np.where(ok, fy, 0.0).astype(np.int64), ny - 1)
    cell_of = np.where(ok, cy * nx + cx, -1)

    order = np.argsort(cell_of, kind="stable")
    sorted_cells = cell_of[order]
    bounds = np.searchsorted(sorted_cells, np.arange(nx * ny + 1))

    for c in range(nx * ny):
        lo, hi = bounds[c], bounds[c + 1]
        if lo == hi or cell_ptr[c] == cell_ptr[c + 1]:
            continue
        idx = order[lo:hi]
        for z in cell_zones[cell_ptr[c]:cell_ptr[c + 1]]:
            if idx.size == 0:
                break
            x = px[idx]
            y = py[idx]
            near = (x >= bbox[z, 0]) & (x <= bbox[z, 2]) & (y >= bbox[z, 1]) & (y <= bbox[z, 3])
            if not near.any():
                continue
            hit = np.zeros(idx.shape, dtype=bool)
            hit[near] = _covers(x[near], y[near], z, zone_ring_ptr, ring_ptr, vx, vy)
            out[idx[hit]] = z
            idx = idx[~hit]
    return out


def lisa_extreme_counts(z, indptr, indices, weights, m2, permutations,
                        keys, start, stop, counts, observed):
    n = z.shape[0]
    m = n - 1
    rows = np.arange(permutations)
    scratch = np.tile(np.arange(max(m, 1), dtype=np.int64), (permutations, 1))
    for i in range(start, stop):
        base = indptr[i]
        k = indptr[i + 1] - base
        scale = z[i] / m2
        lag = 0.0
        for t in range(k):
            lag = lag + weights[base + t] * z[indices[base + t]]
        obs = scale * lag
        observed[i] = obs
        if k == 0:
            counts[i] = -1
            continue
        sims = np.zeros(permutations)
        picked = []
        for t in range(k):
            u = uniform_at(keys[i], rows.astype(np.uint64) * np.uint64(k) + np.uint64(t))
            r = t + (u * float(m - t)).astype(np.int64)
            a = scratch[rows, t].copy()
            b = scratch[rows, r]
            scratch[rows, t] = b
            scratch[rows, r] = a
            picked.append(r)
            j = b + (b >= i)
            sims = sims + weights[base + t] * z[j]
        for t, r in enumerate(picked):
            scratch[rows, t] = t
            scratch[rows, r] = r
        sims = scale * sims
        if obs >= 0.0:
            counts[i] = int(np.count_nonzero(sims >= obs))
        else:
            counts[i] = int(np.count_nonzero(sims <= obs))
