import filecmp
import json

import pytest

from tourmap import synth
from tourmap.classify import Label, label_users
from tourmap.errors import ConfigError, DataError
from tourmap.ingest import parse_lines

SCENARIO = {"rows": "5", "cols": "5", "seed": "3", "hotspot.photo": "1-3:1-3:100",
            "hotspot.checkin": "0:4:5", "background.tweet": "1", "residents": "15"}


def test_hotspot_truth():
    out = synth.generate(synth.scenario_from_mapping(SCENARIO))
    assert out.truth_hotspots["photo"] == sorted(f"r{r:03d}c{c:03d}" for r in (1, 2, 3) for c in (1, 2, 3))
    assert out.truth_hotspots["checkin"] == ["r000c004"]
    assert len(out.zones["features"]) == 25


def test_classifier_recovers_truth():
    out = synth.generate(synth.scenario_from_mapping(SCENARIO))
    truth = {(u, s): lab for u, s, lab in out.truth_labels}
    for kind, lines in out.events.items():
        records, report = parse_lines(lines, kind, "projected")
        assert report.rejected == 0
        for lab in label_users(records):
            assert truth[(lab.user_id, kind.value)] == lab.label.value


def test_residents_only():
    sc = synth.scenario_from_mapping({"rows": "3", "cols": "3", "residents": "40"})
    out = synth.generate(sc)
    records, _ = parse_lines(out.events[synth.Source.PHOTO], "photo", "projected")
    assert {lab.label for lab in label_users(records)} == {Label.RESIDENT}


def test_byte_identical(tmp_path):
    sc = synth.scenario_from_mapping(SCENARIO)
    a = synth.generate_to(sc, tmp_path / "a")
    b = synth.generate_to(synth.scenario_from_mapping(SCENARIO), tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors


def test_written_config_and_files(tmp_path):
    out = synth.generate_to(synth.scenario_from_mapping(SCENARIO), tmp_path / "c")
    conf = (out / "pipeline.conf").read_text()
    assert "center = 500.0,500.0" in conf and "seed = 3" in conf
    assert json.loads((out / "truth_hotspots.json").read_text())["photo"]


@pytest.mark.parametrize("values, error", [
    ({"rows": "5", "cols": "5", "hotspot.photo": "4-5:0-1:10"}, DataError),
    ({"rows": "1", "cols": "5"}, DataError),
    ({"rows": "5", "cols": "5", "background.photo": "-1"}, DataError),
    ({"rows": "5", "bogus": "1"}, ConfigError),
    ({"hotspot.photo": "1-2:3"}, ConfigError),
])
def test_infeasible(values, error):
    with pytest.raises(error):
        synth.generate(synth.scenario_from_mapping(values))


def test_tweet_hours_concentrated():
    sc = synth.scenario_from_mapping({"rows": "4", "cols": "4", "background.tweet": "200", "seed": "1"})
    lines = synth.generate(sc).events[synth.Source.TWEET]
    records, _ = parse_lines(lines, "tweet", "projected")
    evening = sum(18 <= r.timestamp.hour <= 21 for r in records) / len(records)
    assert 0.6 < evening < 0.8
