"""Bivariate OLS between sources and K-means zone typology."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import NumericError


@dataclass
class RegressionResult:
    x_source: Optional[str]
    y_source: Optional[str]
    slope: float
    intercept: float
    r2: float
    adj_r2: float
    p_value: float
    residuals: np.ndarray = field(repr=False)
    std_residuals: np.ndarray = field(repr=False)

    @property
    def n(self):
        return len(self.residuals)


def ols_bivariate(x, y, x_source=None, y_source=None):
    """Least-squares fit y = a + b x.

    Standardised residuals are e_i / s with s = sqrt(SSE / (n - 2)); they are
    all zero for an exact fit. r2 is the squared Pearson correlation, taken
    as 0 when y is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if y.size != n:
        raise NumericError("x and y differ in length")
    if n < 3:
        raise NumericError("OLS needs at least 3 observations")
    if np.ptp(x) == 0:
        raise NumericError("constant regressor: x has zero variance")
    xd = x - x.mean()
    yd = y - y.mean()
    sxx = float(xd @ xd)
    sxy = float(xd @ yd)
    syy = float(yd @ yd)
    slope = sxy / sxx
    intercept = float(y.mean() - slope * x.mean())
    fitted = intercept + slope * x
    resid = y - fitted
    # residuals at rounding-noise level mean the fit is exact
    noise = 8.0 * n * np.finfo(np.float64).eps * max(float(np.abs(y).max()), float(np.abs(fitted).max()))
    if float(np.abs(resid).max()) <= noise:
        resid = np.zeros(n)
    sse = float(resid @ resid)
    if syy == 0.0:
        r2 = 0.0
    else:
        r2 = min(1.0, sxy * sxy / (sxx * syy))
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    s = math.sqrt(sse / (n - 2))
    if s > 0.0:
        std = resid / s
        t = slope / (s / math.sqrt(sxx))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    else:
        std = np.zeros(n)
        p = 0.0 if slope != 0.0 else 1.0
    return RegressionResult(x_source, y_source, float(slope), intercept, float(r2), float(adj),
                            p, resid, std)


@dataclass
class ClusterModel:
    k: int
    centers: np.ndarray
    assignments: np.ndarray  # group ids 1..k
    inertia: float
    seed: Optional[int]
    restarts: int
    n_iter: int = 0
    inertia_history: list = field(default_factory=list, repr=False)


def _sq_dist(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(points, k, rng):
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[c] = points[idx]
        closest = np.minimum(closest, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers, max_iter, tol):
    """Lloyd iterations; returns centers, labels, inertia, history."""
    k = len(centers)
    history = []
    labels = None
    inertia = math.inf
    for it in range(max_iter):
        d = _sq_dist(points, centers)
        labels = d.argmin(axis=1)
        inertia_now = float(d[np.arange(len(points)), labels].sum())
        history.append(inertia_now)
        if it > 0 and (inertia - inertia_now) <= tol * max(inertia, 1e-300):
            inertia = inertia_now
            break
        inertia = inertia_now
        new = np.empty_like(centers)
        sizes = np.bincount(labels, minlength=k)
        for c in range(k):
            if sizes[c]:
                new[c] = points[labels == c].mean(axis=0)
        dist_own = d[np.arange(len(points)), labels]
        for c in np.flatnonzero(sizes == 0):
            # reseed an empty group at the point farthest from its centre
            far = int(dist_own.argmax())
            new[c] = points[far]
            dist_own[far] = -1.0
        centers = new
    d = _sq_dist(points, centers)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(len(points)), labels].sum())
    if inertia < history[-1]:
        history.append(inertia)
    return centers, labels, inertia, history


def kmeans(points, k=6, seed=0, restarts=50, max_iter=300, tol=1e-6, jobs=1):
    """K-means with k-means++ seeding and best-of-``restarts`` selection.

    Lloyd iterations stop when the relative inertia change drops below
    ``tol`` or after ``max_iter`` rounds. The winner is the restart with the
    lowest (inertia, restart index). Groups are relabelled 1..k by
    descending sum of centre coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(np.unique(pts, axis=0)) < k:
        raise NumericError(f"k-means needs at least {k} distinct points")
    seqs = np.random.SeedSequence(int(seed)).spawn(restarts)

    def one(r):
        rng = np.random.default_rng(seqs[r])
        return _lloyd(pts, _kmeanspp(pts, k, rng), max_iter, tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(one, range(restarts)))
    else:
        runs = [one(r) for r in range(restarts)]
    best = min(range(restarts), key=lambda r: (runs[r][2], r))
    centers, labels, inertia, history = runs[best]

    order = sorted(range(k), key=lambda c: (-centers[c].sum(), tuple(centers[c])))
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(1, k + 1)
    return ClusterModel(k, centers[order], relabel[labels], inertia, seed, restarts,
                        len(history), history)


def group_profiles(model_or_assignments, variables):
    """Per-group count, mean and sample sd of each variable, plus a Total row.

    Parameters
    ----------
    model_or_assignments : ClusterModel or array of group ids
    variables : dict
        ``{name: per-zone vector}``.

    Returns
    -------
    list of dict
        One row per group (ascending id), then ``group='Total'``.
    """
    groups = getattr(model_or_assignments, "assignments", model_or_assignments)
    groups = np.asarray(groups)

    def row(label, mask):
        out = {"group": label, "count": int(mask.sum())}
        for name, v in variables.items():
            vals = np.asarray(v, dtype=np.float64)[mask]
            out[f"{name}_mean"] = float(vals.mean()) if vals.size else math.nan
            out[f"{name}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        return out

    rows = [row(int(g), groups == g) for g in np.unique(groups)]
    rows.append(row("Total", np.ones(groups.size, dtype=bool)))
    return rows


def write_rows(path, rows):
    if not rows:
        open(path, "w").close()
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
