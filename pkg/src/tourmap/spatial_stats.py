"""Inverse-distance band weights, global Moran's I and local Moran (LISA).

Weights are w_ij = 1/d_ij between zone centroids with 0 < d_ij <= threshold
(coincident centroids are clamped to d = 1 m), optionally row-standardised.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy import stats
from scipy.spatial import cKDTree

from . import _backend
from .errors import NumericError
from .ingest import CrsMode
from .zones import EARTH_RADIUS_M, haversine

PERMUTATIONS = 999
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True, eq=False)
class SpatialWeights:
    """Sparse weights in CSR layout (column indices ascending per row)."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    threshold_m: float
    row_standardized: bool = False

    @property
    def s0(self):
        return float(self.data.sum())

    @property
    def sparse(self):
        return sparse.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @property
    def s1(self):
        w = self.sparse
        return float(0.5 * ((w + w.T).power(2)).sum())

    @property
    def s2(self):
        w = self.sparse
        rows = np.asarray(w.sum(axis=1)).ravel()
        cols = np.asarray(w.sum(axis=0)).ravel()
        return float(((rows + cols) ** 2).sum())

    @property
    def cardinalities(self):
        return np.diff(self.indptr)

    def dense(self):
        return self.sparse.toarray()

    def neighbors(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def lag(self, z):
        return self.sparse @ np.asarray(z, dtype=np.float64)


def _band_pairs(points, threshold_m, crs_mode):
    """Index pairs (i < j) and distances with d <= threshold."""
    if CrsMode(crs_mode) is CrsMode.GEOGRAPHIC:
        lon, lat = np.radians(points[:, 0]), np.radians(points[:, 1])
        xyz = np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])
        chord = 2.0 * math.sin(min(threshold_m / EARTH_RADIUS_M, math.pi) / 2.0)
        pairs = cKDTree(xyz).query_pairs(chord * (1 + 1e-9) + 1e-12, output_type="ndarray")
        if len(pairs) == 0:
            return pairs.reshape(0, 2), np.empty(0)
        d = haversine(points[pairs[:, 0], 0], points[pairs[:, 0], 1],
                      points[pairs[:, 1], 0], points[pairs[:, 1], 1])
    else:
        pairs = cKDTree(points).query_pairs(threshold_m * (1 + 1e-9), output_type="ndarray")
        if len(pairs) == 0:
            return pairs.reshape(0, 2), np.empty(0)
        diff = points[pairs[:, 0]] - points[pairs[:, 1]]
        d = np.hypot(diff[:, 0], diff[:, 1])
    keep = d <= threshold_m
    return pairs[keep], d[keep]


def build_weights_from_points(points, threshold_m=500.0, row_standardize=False,
                              crs_mode="projected"):
    if not threshold_m > 0:
        raise ValueError("threshold_m must be positive")
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        raise ValueError("at least two zones are required")
    pairs, d = _band_pairs(points, threshold_m, crs_mode)
    w = 1.0 / np.maximum(d, MIN_DISTANCE_M)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    vals = np.concatenate([w, w])
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sort_indices()
    data = mat.data.astype(np.float64)
    if row_standardize:
        card = np.diff(mat.indptr)
        sums = np.bincount(np.repeat(np.arange(n), card), weights=data, minlength=n)
        sums = np.where(card > 0, sums, 1.0)
        data = data / np.repeat(sums, card)
    return SpatialWeights(n, mat.indptr.astype(np.int64), mat.indices.astype(np.int64),
                          np.ascontiguousarray(data), float(threshold_m), bool(row_standardize))


def build_weights(zones, threshold_m=500.0, row_standardize=False, crs_mode="projected"):
    """Inverse-distance band weights between zone centroids.

    Parameters
    ----------
    zones : list of Zone
    threshold_m : float
        Band radius in metres (500 by default).
    row_standardize : bool
        Divide each row by its sum; rows without neighbours stay zero.
    crs_mode : {'projected', 'geographic'}
        Euclidean or haversine centroid distances.
    """
    pts = np.array([z.centroid for z in zones], dtype=np.float64)
    return build_weights_from_points(pts, threshold_m, row_standardize, crs_mode)


def _deviations(values):
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0:
        raise NumericError("zero variance: values are constant")
    z = x - x.mean()
    return z


@dataclass
class MoranResult:
    I: float
    expected: float
    variance: float
    z_score: float
    p_value: float
    perm_p: Optional[float]
    permutations: int
    seed: Optional[int]
    sim_mean: Optional[float] = None
    sim_sd: Optional[float] = None
    simulations: Optional[np.ndarray] = field(default=None, repr=False)


def _randomization_variance(z, w, n):
    if n < 4:
        return math.nan
    s0, s1, s2 = w.s0, w.s1, w.s2
    m2 = (z ** 2).sum() / n
    m4 = (z ** 4).sum() / n
    b2 = m4 / m2 ** 2
    ei = -1.0 / (n - 1)
    a = n * ((n * n - 3 * n + 3) * s1 - n * s2 + 3 * s0 ** 2)
    b = b2 * ((n * n - n) * s1 - 2 * n * s2 + 6 * s0 ** 2)
    return float((a - b) / ((n - 1) * (n - 2) * (n - 3) * s0 ** 2) - ei ** 2)


def global_moran(values, w, permutations=PERMUTATIONS, seed=0, keep_simulations=False):
    """Global Moran's I with analytical and permutation inference.

    I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2. The z-score uses the
    variance under the randomisation assumption, with a two-sided normal
    p-value. ``perm_p`` permutes the whole vector and counts simulations at
    least as extreme as I in the direction of its sign, with the +1/+1
    correction.
    """
    z = _deviations(values)
    n = z.size
    s0 = w.s0
    if not s0 > 0:
        raise NumericError("empty weights: S0 = 0")
    wm = w.sparse
    ss = float(z @ z)
    stat = n / s0 * float(z @ (wm @ z)) / ss
    expected = -1.0 / (n - 1)
    var = _randomization_variance(z, w, n)
    if var > 0:
        zs = (stat - expected) / math.sqrt(var)
        p = float(2.0 * stats.norm.sf(abs(zs)))
    else:
        zs = p = math.nan

    res = MoranResult(stat, expected, var, zs, p, None, int(permutations), seed)
    if permutations:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4D4F52414E]))
        sims = np.empty(permutations)
        chunk = 256
        for lo in range(0, permutations, chunk):
            m = min(chunk, permutations - lo)
            zp = rng.permuted(np.broadcast_to(z, (m, n)), axis=1)
            lag = (wm @ zp.T).T
            sims[lo:lo + m] = n / s0 * np.einsum("ij,ij->i", zp, lag) / ss
        extreme = np.count_nonzero(sims >= stat) if stat >= 0 else np.count_nonzero(sims <= stat)
        res.perm_p = (extreme + 1.0) / (permutations + 1.0)
        res.sim_mean = float(sims.mean())
        res.sim_sd = float(sims.std(ddof=1)) if permutations > 1 else 0.0
        if keep_simulations:
            res.simulations = sims
    return res


@dataclass
class LisaResult:
    I: np.ndarray
    lag: np.ndarray
    quadrant: list
    pseudo_p: np.ndarray
    significant: np.ndarray
    alpha: float
    permutations: int
    seed: Optional[int]
    zone_ids: Optional[list] = None

    def labels(self):
        """Quadrant when significant, 'NS' otherwise, 'isolated' kept."""
        return [q if (q == "isolated" or sig) else "NS"
                for q, sig in zip(self.quadrant, self.significant)]


def _quadrants(z, lag, card):
    out = []
    for zi, li, k in zip(z, lag, card):
        if k == 0:
            out.append("isolated")
        elif zi > 0:
            out.append("HH" if li > 0 else "HL")
        else:
            out.append("LH" if li > 0 else "LL")
    return out


def local_moran(values, w, permutations=PERMUTATIONS, alpha=0.05, seed=0, jobs=1,
                zone_ids=None, backend=None):
    """Anselin's local Moran with conditional permutation inference.

    I_i = (z_i / m2) * sum_j w_ij z_j with m2 = sum_k z_k^2 / n, so that
    sum_i I_i = S0 * I. For each zone with neighbours, the neighbour values
    are redrawn ``permutations`` times from the other n - 1 zones while z_i
    is held fixed; pseudo_p = (extreme + 1) / (permutations + 1), one-sided
    in the direction of the observed statistic. Zones without neighbours are
    'isolated' and never significant.

    Results depend only on (values, w, permutations, seed): each zone reads
    its own random stream, so ``jobs`` and the kernel backend do not change
    the output.
    """
    z = _deviations(values)
    n = z.size
    if not w.s0 > 0:
        raise NumericError("empty weights: S0 = 0")
    m2 = float(z @ z) / n
    keys = np.ascontiguousarray(_backend.stream_key(seed, np.arange(n)), dtype=np.uint64)
    counts = np.zeros(n, dtype=np.int64)
    observed = np.zeros(n, dtype=np.float64)
    kernel = _backend.get("lisa_extreme_counts", backend)
    z = np.ascontiguousarray(z)
    args = (z, w.indptr, w.indices, w.data, m2, int(permutations), keys)

    jobs = max(1, int(jobs))
    if jobs == 1 or n < 2 * jobs:
        kernel(*args, 0, n, counts, observed)
    else:
        bounds = np.linspace(0, n, jobs * 4 + 1).astype(int)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(kernel, *args, int(lo), int(hi), counts, observed)
                       for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            for f in futures:
                f.result()

    card = w.cardinalities
    lag = w.lag(z)
    quadrant = _quadrants(z, lag, card)
    if permutations:
        pseudo_p = np.where(card > 0, (counts + 1.0) / (permutations + 1.0), np.nan)
    else:
        pseudo_p = np.full(n, np.nan)
    significant = (card > 0) & (pseudo_p <= alpha)
    return LisaResult(observed, lag, quadrant, pseudo_p, significant, float(alpha),
                      int(permutations), seed, list(zone_ids) if zone_ids is not None else None)


def write_lisa(path, zone_ids, res):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["zone_id", "I", "quadrant", "pseudo_p", "significant", "label"])
        for zid, i, q, p, s, lab in zip(zone_ids, res.I, res.quadrant, res.pseudo_p,
                                        res.significant, res.labels()):
            out.writerow([zid, repr(float(i)), q, "" if math.isnan(p) else repr(float(p)),
                          int(bool(s)), lab])


def read_lisa(path, alpha=None):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    pp = np.array([float(r["pseudo_p"]) if r["pseudo_p"] else np.nan for r in rows])
    sig = np.array([r["significant"] == "1" for r in rows])
    if alpha is not None:
        sig = np.array([r["quadrant"] != "isolated" for r in rows]) & (pp <= alpha)
    res = LisaResult(np.array([float(r["I"]) for r in rows]), np.full(len(rows), np.nan),
                     [r["quadrant"] for r in rows], pp, sig,
                     float(alpha) if alpha is not None else math.nan, 0, None,
                     [r["zone_id"] for r in rows])
    return res
