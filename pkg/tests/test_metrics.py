import numpy as np
import pytest

from tourmap.errors import DataError, NumericError
from tourmap.ingest import Source
from tourmap.metrics import (
    density,
    descriptive_stats,
    read_zone_metrics,
    rescale,
    temporal_profile,
    unique_tourist_counts,
    write_zone_metrics,
)
from tourmap.zones import PointAssignment

from .helpers import event

IDS = ["A", "B", "C"]


def assign(zone_ids):
    return [PointAssignment(i, z) for i, z in enumerate(zone_ids)]


def test_one_tourist_counted_once():
    ev = [event("u", "2013-01-01T10:00")] * 3
    counts = unique_tourist_counts(ev, assign(["A"] * 3), IDS, [Source.PHOTO])
    assert counts[Source.PHOTO].tolist() == [1, 0, 0]


def test_tourist_in_two_zones_counts_in_each():
    ev = [event("u", "2013-01-01T10:00"), event("u", "2013-01-02T10:00")]
    counts = unique_tourist_counts(ev, assign(["A", "B"]), IDS, [Source.PHOTO])
    assert counts[Source.PHOTO].tolist() == [1, 1, 0]


def test_sources_counted_separately_and_unassigned_ignored():
    ev = [event("u", "2013-01-01T10:00"), event("u", "2013-01-01T10:00", source=Source.TWEET),
          event("v", "2013-01-01T10:00", source=Source.TWEET)]
    counts = unique_tourist_counts(ev, assign(["C", "C", None]), IDS)
    assert counts[Source.PHOTO].tolist() == [0, 0, 1]
    assert counts[Source.TWEET].tolist() == [0, 0, 1]


def test_no_events_all_zero():
    counts = unique_tourist_counts([], [], IDS, [Source.PHOTO, Source.TWEET])
    assert all(c.tolist() == [0, 0, 0] for c in counts.values())


def test_misaligned_assignments_fatal():
    with pytest.raises(DataError):
        unique_tourist_counts([event("u", "2013-01-01T10:00")], [], IDS)


def test_duplicate_event_invariance(rng):
    ev = [event(f"u{rng.integers(20)}", "2013-01-01T10:00") for _ in range(100)]
    zones = [IDS[int(rng.integers(3))] for _ in ev]
    base = unique_tourist_counts(ev, assign(zones), IDS, [Source.PHOTO])
    dup = unique_tourist_counts(ev + ev[:30], assign(zones + zones[:30]), IDS, [Source.PHOTO])
    assert np.array_equal(base[Source.PHOTO], dup[Source.PHOTO])


def test_density(grid_zones):
    counts = {Source.PHOTO: np.arange(16)}
    dens = density(counts, grid_zones)
    assert dens[Source.PHOTO][10] == 10.0 and dens[Source.PHOTO][0] == 0.0


def test_rescale_examples():
    assert rescale([0, 2, 4]).tolist() == [0.0, 500.0, 1000.0]
    with pytest.raises(NumericError, match="degenerate rescale"):
        rescale([5, 5, 5])


def test_rescale_preserves_order(rng):
    v = rng.exponential(size=200)
    r = rescale(v)
    assert np.array_equal(np.argsort(v, kind="stable"), np.argsort(r, kind="stable"))
    assert r[v.argmin()] == 0.0 and r[v.argmax()] == 1000.0


def test_descriptive_examples():
    s = descriptive_stats([1, 2, 3])
    assert (s.count, s.mean, s.sd, s.cv) == (3, 2.0, 1.0, 50.0)
    z = descriptive_stats([0, 0, 0])
    assert (z.mean, z.sd, z.cv) == (0.0, 0.0, None)
    assert descriptive_stats([4.0]).sd == 0.0
    assert descriptive_stats(np.zeros(2415)).count == 2415
    with pytest.raises(NumericError):
        descriptive_stats([])


def test_descriptive_invariants(rng):
    v = rng.gamma(0.5, size=300)
    s = descriptive_stats(v)
    assert s.min <= s.mean <= s.max
    assert s.sum == pytest.approx(s.mean * s.count, rel=1e-12)
    assert descriptive_stats(7.5 * v).cv == pytest.approx(s.cv, rel=1e-12)


def test_temporal_profile():
    ev = [event("a", "2013-01-01T18:05"), event("a", "2013-01-01T19:10"), event("a", "2013-01-01T20:59")]
    prof = temporal_profile(ev)[Source.PHOTO]
    assert [prof.hour_counts[h] for h in (18, 19, 20)] == [1, 1, 1]
    assert prof.total == 3 and sum(prof.hour_shares) == pytest.approx(1.0)
    empty = temporal_profile([], [Source.TWEET])[Source.TWEET]
    assert empty.hour_counts == (0,) * 24 and empty.hour_shares == (0.0,) * 24


def test_temporal_share_identity():
    hours = [18, 19, 20, 21] * 15 + [3, 9, 12, 15] * 10
    ev = [event("a", f"2013-01-01T{h:02d}:00", source=Source.TWEET) for h in hours]
    prof = temporal_profile(ev)[Source.TWEET]
    assert sum(prof.hour_counts[18:22]) / prof.total == 0.6


def test_metrics_csv_roundtrip(tmp_path, grid_zones):
    ids = [z.zone_id for z in grid_zones]
    counts = {Source.PHOTO: np.arange(16), Source.TWEET: np.arange(16)[::-1]}
    dens = density(counts, grid_zones)
    resc = {s: rescale(v) for s, v in dens.items()}
    write_zone_metrics(tmp_path / "m.csv", ids, counts, dens, resc)
    ids2, c2, d2, r2 = read_zone_metrics(tmp_path / "m.csv")
    assert ids2 == ids
    for s in counts:
        assert np.array_equal(c2[s], counts[s])
        assert np.array_equal(d2[s], dens[s]) and np.array_equal(r2[s], resc[s])
