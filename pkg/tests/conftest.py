import json

import numpy as np
import pytest

from tourmap import synth
from tourmap.spatial_stats import build_weights_from_points
from tourmap.zones import zones_from_geojson

from .helpers import collection, feature, grid_points, square


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid_zones():
    """4x4 grid of 100 m squares, ids z00..z15."""
    feats = [feature(f"z{r * 4 + c:02d}", [square(c * 100.0, r * 100.0, 100.0)])
             for r in range(4) for c in range(4)]
    return zones_from_geojson(collection(feats))


@pytest.fixture
def grid_weights():
    return build_weights_from_points(grid_points(5, 5))


@pytest.fixture
def write_ndjson(tmp_path):
    def _write(name, objs):
        path = tmp_path / name
        path.write_text("".join((o if isinstance(o, str) else json.dumps(o)) + "\n" for o in objs),
                        encoding="utf-8")
        return path
    return _write


SMALL_CITY = {
    "rows": "6", "cols": "6", "seed": "4", "residents": "20",
    "hotspot.photo": "1-2:1-2:12", "hotspot.checkin": "1-2:1-2:10; 4-5:4-5:10",
    "hotspot.tweet": "1-2:1-2:12; 4-5:0-1:10",
    "background.photo": "0.5", "background.checkin": "0.5", "background.tweet": "0.5",
}


@pytest.fixture
def small_city(tmp_path):
    """A synthetic 6x6 city written to disk; returns (directory, scenario)."""
    sc = synth.scenario_from_mapping(SMALL_CITY)
    out = synth.generate_to(sc, tmp_path / "city")
    conf = out / "pipeline.conf"
    conf.write_text(conf.read_text() + "restarts = 5\npermutations = 199\n")
    return out, sc


# -- acceptance summary: one line per criterion at the end of the run ---------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[number] = (title, report.outcome, getattr(item, "criterion_note", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, note = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f"  ({note})" if note else ""))
