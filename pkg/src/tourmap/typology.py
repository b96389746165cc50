"""Fusion of per-source significant High-High clusters into a zone typology."""

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError
from .ingest import Source
from .zones import distance

SOURCE_ORDER = (Source.PHOTO, Source.CHECKIN, Source.TWEET)
DEFAULT_LETTERS = {Source.PHOTO: "P", Source.CHECKIN: "F", Source.TWEET: "T"}
NONE_LABEL = "none"


def all_labels(letters=None):
    """The eight class labels, ordered by membership size then source order."""
    letters = letters or DEFAULT_LETTERS
    out = [NONE_LABEL]
    for size in (1, 2, 3):
        for combo in combinations(SOURCE_ORDER, size):
            out.append("".join(letters[s] for s in combo))
    return out


def class_label(membership, letters=None):
    letters = letters or DEFAULT_LETTERS
    if not membership:
        return NONE_LABEL
    return "".join(letters[s] for s in SOURCE_ORDER if s in membership)


@dataclass(frozen=True)
class TypologyClass:
    zone_id: str
    membership: frozenset
    class_label: str


def combine_hh(lisa_photo, lisa_checkin, lisa_tweet, zone_ids=None, letters=None):
    """Classify zones by the sources whose significant HH cluster holds them."""
    results = {Source.PHOTO: lisa_photo, Source.CHECKIN: lisa_checkin, Source.TWEET: lisa_tweet}
    return combine_hh_map(results, zone_ids, letters)


def combine_hh_map(results, zone_ids=None, letters=None):
    """As :func:`combine_hh` for a ``{source: LisaResult}`` mapping (any subset)."""
    sizes = {len(r.quadrant) for r in results.values()}
    if len(sizes) != 1:
        raise DataError("LISA results cover different zone sets")
    ids = [r.zone_ids for r in results.values() if r.zone_ids is not None]
    if ids and any(i != ids[0] for i in ids):
        raise DataError("LISA results cover different zone sets")
    alphas = {r.alpha for r in results.values() if not math.isnan(r.alpha)}
    if len(alphas) > 1:
        raise DataError("LISA results use different significance levels")
    n = sizes.pop()
    if zone_ids is None:
        zone_ids = ids[0] if ids else [str(i) for i in range(n)]
    elif len(zone_ids) != n:
        raise DataError("zone_ids do not match LISA results")
    out = []
    for k, zid in enumerate(zone_ids):
        member = frozenset(s for s, r in results.items()
                           if r.quadrant[k] == "HH" and bool(r.significant[k]))
        out.append(TypologyClass(zid, member, class_label(member, letters)))
    return out


def specialization_gradient(typology, zones, center, ring_m=1000.0, crs_mode="projected",
                            letters=None):
    """Class shares per concentric distance ring around ``center``.

    Each row covers one ring [k*ring_m, (k+1)*ring_m) of zone-centroid
    distance. ``share_<label>`` is over all zones in the ring;
    ``mixed_share`` and ``single_share`` are over zones with non-empty
    membership (None when the ring has none). Rings without zones are
    skipped; an empty typology gives an empty table.
    """
    if not typology:
        return []
    if ring_m <= 0:
        raise ValueError("ring_m must be positive")
    by_id = {z.zone_id: z for z in zones}
    labels = all_labels(letters)
    rings = {}
    for t in typology:
        d = distance(center, by_id[t.zone_id].centroid, crs_mode)
        rings.setdefault(int(d // ring_m), []).append(t)
    rows = []
    for k in sorted(rings):
        members = rings[k]
        sizes = np.array([len(t.membership) for t in members])
        typed = sizes[sizes > 0]
        row = {"ring": k + 1, "inner_m": k * ring_m, "outer_m": (k + 1) * ring_m,
               "zones": len(members), "mean_membership": float(sizes.mean()),
               "mixed_share": float((typed >= 2).mean()) if typed.size else None,
               "single_share": float((typed == 1).mean()) if typed.size else None}
        for lab in labels:
            row[f"share_{lab}"] = sum(t.class_label == lab for t in members) / len(members)
        rows.append(row)
    return rows


def write_typology(path, typology):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_id", "typology", "membership_size"])
        for t in typology:
            w.writerow([t.zone_id, t.class_label, len(t.membership)])
