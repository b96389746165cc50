import itertools

import numpy as np
import pytest

from tourmap.errors import DataError
from tourmap.ingest import Source
from tourmap.spatial_stats import LisaResult
from tourmap.typology import (
    TypologyClass,
    all_labels,
    class_label,
    combine_hh,
    combine_hh_map,
    specialization_gradient,
)
from tourmap.zones import zones_from_geojson

from .helpers import collection, feature, square


def lisa(quadrants, significant, ids=None, alpha=0.05):
    n = len(quadrants)
    return LisaResult(np.zeros(n), np.zeros(n), list(quadrants), np.full(n, 0.01),
                      np.array(significant, dtype=bool), alpha, 99, 0, ids)


def test_label_covers_all_subsets():
    sources = (Source.PHOTO, Source.CHECKIN, Source.TWEET)
    labels = {class_label(frozenset(c)) for k in range(4) for c in itertools.combinations(sources, k)}
    assert labels == set(all_labels()) and len(labels) == 8


def test_combine_examples():
    ids = ["a", "b", "c", "d"]
    p = lisa(["HH", "LL", "HH", "HH"], [1, 1, 1, 0], ids)
    f = lisa(["HH", "HH", "LH", "HH"], [1, 0, 1, 1], ids)
    t = lisa(["HH", "HL", "LL", "HH"], [1, 1, 1, 1], ids)
    out = combine_hh(p, f, t)
    assert [c.class_label for c in out] == ["PFT", "none", "P", "FT"]
    assert out[3].membership == frozenset({Source.CHECKIN, Source.TWEET})


def test_order_independent_and_idempotent():
    ids = ["a", "b", "c"]
    results = {Source.TWEET: lisa(["HH", "HH", "LL"], [1, 0, 1], ids),
               Source.PHOTO: lisa(["HH", "LL", "HH"], [1, 1, 1], ids)}
    a = combine_hh_map(results)
    b = combine_hh_map(dict(reversed(list(results.items()))))
    assert a == b == combine_hh_map(results)
    assert [c.class_label for c in a] == ["PT", "none", "P"]


def test_mismatched_sets_fatal():
    with pytest.raises(DataError):
        combine_hh(lisa(["HH"], [1]), lisa(["HH", "LL"], [1, 1]), lisa(["HH"], [1]))
    with pytest.raises(DataError):
        combine_hh(lisa(["HH"], [1], ["a"]), lisa(["HH"], [1], ["b"]), lisa(["HH"], [1], ["a"]))
    with pytest.raises(DataError):
        combine_hh(lisa(["HH"], [1], alpha=0.05), lisa(["HH"], [1], alpha=0.1), lisa(["HH"], [1]))


def ring_zones(distances):
    return zones_from_geojson(collection(feature(f"z{i}", [square(d - 5, -5, 10)])
                                         for i, d in enumerate(distances)))


def test_gradient_mixed_core_single_periphery():
    zones = ring_zones([100, 300, 2100, 2500, 1500])
    full = frozenset({Source.PHOTO, Source.CHECKIN, Source.TWEET})
    typ = [TypologyClass("z0", full, "PFT"), TypologyClass("z1", full, "PFT"),
           TypologyClass("z2", frozenset({Source.PHOTO}), "P"),
           TypologyClass("z3", frozenset({Source.PHOTO}), "P"),
           TypologyClass("z4", frozenset(), "none")]
    rows = specialization_gradient(typ, zones, (0.0, 0.0), 1000.0)
    assert [r["ring"] for r in rows] == [1, 2, 3]
    assert rows[0]["mixed_share"] == 1.0 and rows[0]["share_PFT"] == 1.0
    assert rows[1]["mixed_share"] is None and rows[1]["share_none"] == 1.0
    assert rows[2]["single_share"] == 1.0 and rows[2]["mean_membership"] == 1.0
    assert rows[0]["mean_membership"] == 3.0


def test_gradient_empty():
    assert specialization_gradient([], [], (0, 0)) == []
