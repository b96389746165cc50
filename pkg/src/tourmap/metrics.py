"""Per-zone tourist counts, densities, rescaling and summary statistics."""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, NumericError
from .ingest import Source


@dataclass(frozen=True)
class DescriptiveStats:
    count: int
    min: float
    max: float
    sum: float
    mean: float
    sd: float
    cv: Optional[float]

    ROWS = (
        ("Count", "count"),
        ("Minimum", "min"),
        ("Maximum", "max"),
        ("Sum", "sum"),
        ("Mean", "mean"),
        ("Standard Deviation", "sd"),
        ("Variation coefficient", "cv"),
    )


@dataclass(frozen=True)
class TemporalProfile:
    source: Source
    hour_counts: tuple
    hour_shares: tuple

    @property
    def total(self):
        return sum(self.hour_counts)


def unique_tourist_counts(events, assignments, zone_ids, sources=None):
    """Distinct users per zone and source.

    Parameters
    ----------
    events : sequence of EventRecord
        Tourist events.
    assignments : sequence of PointAssignment
        One per event, aligned by ``event_index``.
    zone_ids : sequence of str
        Output order of zones.
    sources : iterable of Source, optional
        Sources to report; defaults to all sources seen in ``events``.

    Returns
    -------
    dict
        ``{source: int array aligned with zone_ids}``.
    """
    if len(assignments) != len(events):
        raise DataError("assignments do not cover all events")
    pos = {zid: k for k, zid in enumerate(zone_ids)}
    seen = set()
    for a in assignments:
        if a.zone_id is None:
            continue
        e = events[a.event_index]
        seen.add((e.source, pos[a.zone_id], e.user_id))
    if sources is None:
        sources = sorted({e.source for e in events}, key=lambda s: s.value)
    counts = {Source(s): np.zeros(len(zone_ids), dtype=np.int64) for s in sources}
    for src, k, _ in seen:
        if src in counts:
            counts[src][k] += 1
    return counts


def density(counts, zones):
    """Tourists per hectare."""
    area = np.array([z.area_ha for z in zones], dtype=np.float64)
    if not (area > 0).all():
        bad = [z.zone_id for z in zones if not z.area_ha > 0]
        raise DataError(f"non-positive area for zones {bad[:5]}")
    return {s: np.asarray(c, dtype=np.float64) / area for s, c in counts.items()}


def rescale(values, lo=0.0, hi=1000.0):
    """Min-max map onto [lo, hi] (0 to 1000 by default)."""
    v = np.asarray(values, dtype=np.float64)
    vmin, vmax = v.min(), v.max()
    if not vmax > vmin:
        raise NumericError("degenerate rescale: vector has fewer than two distinct values")
    # divide first so the maximum maps to exactly ``hi``
    return lo + (hi - lo) * ((v - vmin) / (vmax - vmin))


def descriptive_stats(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise NumericError("descriptive statistics of an empty vector")
    n = v.size
    mean = float(v.mean())
    sd = float(v.std(ddof=1)) if n > 1 else 0.0
    cv = None if mean == 0.0 else 100.0 * sd / mean
    return DescriptiveStats(n, float(v.min()), float(v.max()), float(v.sum()), mean, sd, cv)


def temporal_profile(events, sources=None):
    """Hour-of-day histogram per source (local time as recorded)."""
    hist = {}
    for e in events:
        h = hist.get(e.source)
        if h is None:
            h = hist[e.source] = [0] * 24
        h[e.timestamp.hour] += 1
    if sources is None:
        sources = sorted(hist, key=lambda s: s.value)
    out = {}
    for s in sources:
        s = Source(s)
        counts = hist.get(s, [0] * 24)
        total = sum(counts)
        shares = [c / total if total else 0.0 for c in counts]
        out[s] = TemporalProfile(s, tuple(counts), tuple(shares))
    return out


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def write_zone_metrics(path, zone_ids, counts, densities, rescaled=None):
    sources = list(counts)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["zone_id"]
        for s in sources:
            header += [f"{s.value}_count", f"{s.value}_density"]
            if rescaled is not None:
                header.append(f"{s.value}_rescaled")
        w.writerow(header)
        for k, zid in enumerate(zone_ids):
            row = [zid]
            for s in sources:
                row += [_fmt(counts[s][k]), _fmt(densities[s][k])]
                if rescaled is not None:
                    row.append(_fmt(rescaled[s][k]))
            w.writerow(row)


def read_zone_metrics(path):
    """Return (zone_ids, counts, densities, rescaled-or-None) from a metrics CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
        if not rows:
            raise DataError(f"empty metrics file {path}")
        fields = rows[0].keys()
    zone_ids = [r["zone_id"] for r in rows]
    sources = [Source(f[: -len("_count")]) for f in fields if f.endswith("_count")]
    counts = {s: np.array([int(r[f"{s.value}_count"]) for r in rows]) for s in sources}
    dens = {s: np.array([float(r[f"{s.value}_density"]) for r in rows]) for s in sources}
    resc = None
    if all(f"{s.value}_rescaled" in fields for s in sources):
        resc = {s: np.array([float(r[f"{s.value}_rescaled"]) for r in rows]) for s in sources}
    return zone_ids, counts, dens, resc


def write_stats_table(path, blocks):
    """Write Table-1-shaped stats: ``blocks`` maps block name -> {source: stats}."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for name, per_source in blocks.items():
            sources = list(per_source)
            w.writerow([name] + [s.value for s in sources])
            for label, attr in DescriptiveStats.ROWS:
                w.writerow([label] + [_fmt(getattr(per_source[s], attr)) for s in sources])


def write_temporal(path, profiles):
    sources = list(profiles)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour"] + [f"{s.value}_{kind}" for s in sources for kind in ("count", "share")])
        for h in range(24):
            row = [h]
            for s in sources:
                row += [profiles[s].hour_counts[h], _fmt(profiles[s].hour_shares[h])]
            w.writerow(row)
