"""Deterministic synthetic city: square-cell zones and event streams with
planted hotspots, for tests, acceptance checks and benchmarks.

Scenario files use the pipeline's ``key = value`` format::

    rows = 15
    cols = 15
    cell_m = 200
    seed = 7
    background.photo = 0.3          # mean extra tourists per zone (Poisson)
    hotspot.photo = 5-9:5-9:100     # rows:cols:tourists per zone, ';'-separated
    hotspot.checkin = 0-2:12-14:60
    residents = 200
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from .errors import ConfigError, DataError
from .ingest import Source

SOURCES = (Source.PHOTO, Source.CHECKIN, Source.TWEET)
_PREFIX = {Source.PHOTO: "p", Source.CHECKIN: "c", Source.TWEET: "t"}


@dataclass
class Hotspot:
    rows: tuple  # inclusive (first, last)
    cols: tuple
    tourists: int

    def cells(self):
        return [(r, c) for r in range(self.rows[0], self.rows[1] + 1)
                for c in range(self.cols[0], self.cols[1] + 1)]


@dataclass
class CityScenario:
    rows: int = 5
    cols: int = 5
    cell_m: float = 200.0
    origin: tuple = (0.0, 0.0)
    seed: int = 0
    hotspots: dict = field(default_factory=dict)     # Source -> [Hotspot]
    background: dict = field(default_factory=dict)   # Source -> mean tourists per zone
    events_per_tourist: float = 3.0
    residents: int = 0
    resident_events: int = 12
    years: tuple = (2012, 2014)

    def zone_id(self, r, c):
        return f"r{r:03d}c{c:03d}"

    def hotspot_zone_ids(self, source):
        ids = set()
        for h in self.hotspots.get(Source(source), []):
            ids.update(self.zone_id(r, c) for r, c in h.cells())
        return sorted(ids)

    def validate(self):
        if self.rows < 2 or self.cols < 2:
            raise DataError("grid must be at least 2x2")
        if self.cell_m <= 0:
            raise DataError("cell_m must be positive")
        for src, spots in self.hotspots.items():
            for h in spots:
                if h.tourists < 0:
                    raise DataError("hotspot intensity must be >= 0")
                if not (0 <= h.rows[0] <= h.rows[1] < self.rows and 0 <= h.cols[0] <= h.cols[1] < self.cols):
                    raise DataError(f"{src.value} hotspot {h.rows}x{h.cols} lies outside the grid")
        for src, lam in self.background.items():
            if lam < 0:
                raise DataError("background intensity must be >= 0")
        if self.events_per_tourist < 1 or self.resident_events < 2 or self.residents < 0:
            raise DataError("event counts out of range")
        return self


def _range(text, key):
    parts = text.split("-")
    try:
        if len(parts) == 1:
            a = b = int(parts[0])
        elif len(parts) == 2:
            a, b = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise ConfigError(f"{key}: bad range {text!r}") from None
    return (a, b)


def parse_hotspots(text, key="hotspot"):
    spots = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected 'rows:cols:tourists', got {chunk!r}")
        spots.append(Hotspot(_range(parts[0], key), _range(parts[1], key),
                             config_mod._number(parts[2], key, int)))
    return spots


def scenario_from_mapping(values):
    sc = CityScenario()
    for key, value in values.items():
        if key in ("rows", "cols", "seed", "residents", "resident_events"):
            setattr(sc, key, config_mod._number(value, key, int))
        elif key in ("cell_m", "events_per_tourist"):
            setattr(sc, key, config_mod._number(value, key))
        elif key == "origin":
            sc.origin = config_mod.parse_point(value, key)
        elif key == "years":
            sc.years = _range(value, key)
        elif key.startswith("hotspot."):
            sc.hotspots[Source(key[8:])] = parse_hotspots(value, key)
        elif key.startswith("background."):
            sc.background[Source(key[11:])] = config_mod._number(value, key)
        else:
            raise ConfigError(f"unknown scenario key {key!r}")
    return sc


def load_scenario(path):
    return scenario_from_mapping(config_mod.read_file(path))


def _cell_points(rng, sc, rows, cols):
    u = rng.random((len(rows), 2))
    x = sc.origin[0] + (cols + 0.02 + 0.96 * u[:, 0]) * sc.cell_m
    y = sc.origin[1] + (rows + 0.02 + 0.96 * u[:, 1]) * sc.cell_m
    return x, y


def _hours(rng, source, n):
    if source is Source.TWEET:
        evening = rng.random(n) < 0.6
        return np.where(evening, rng.integers(18, 22, n), rng.integers(0, 24, n))
    if source is Source.CHECKIN:
        return rng.integers(8, 24, n)
    return rng.integers(9, 21, n)


@dataclass
class SynthOutput:
    zones: dict
    events: dict          # file kind (photo/tweet) -> NDJSON lines
    truth_labels: list    # (user_id, source, label)
    truth_hotspots: dict  # source value -> sorted zone ids


def generate(sc):
    """Build zones, events and ground truth as in-memory structures.

    Tourists (ids ``p*``, ``c*``, ``t*``) post all their events in one zone
    within a single calendar week, so every yearly span is at most 6 days.
    Residents (``rp*``, ``rt*``) post across at least 30 days of one year
    anywhere in the city. Check-in users live in the tweet file and carry a
    ``4sq.com`` link in their text.
    """
    sc.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(sc.seed), 0x53594E5448]))
    features = []
    for r in range(sc.rows):
        for c in range(sc.cols):
            x0 = sc.origin[0] + c * sc.cell_m
            y0 = sc.origin[1] + r * sc.cell_m
            ring = [[x0, y0], [x0 + sc.cell_m, y0], [x0 + sc.cell_m, y0 + sc.cell_m],
                    [x0, y0 + sc.cell_m], [x0, y0]]
            features.append({"type": "Feature", "properties": {"id": sc.zone_id(r, c)},
                             "geometry": {"type": "Polygon", "coordinates": [ring]}})
    zones = {"type": "FeatureCollection", "features": features}

    n_zones = sc.rows * sc.cols
    zr = np.repeat(np.arange(sc.rows), sc.cols)
    zc = np.tile(np.arange(sc.cols), sc.rows)
    year_lo, year_hi = sc.years
    columns = {Source.PHOTO: [], Source.TWEET: []}
    truth = []

    for src in SOURCES:
        per_zone = rng.poisson(sc.background.get(src, 0.0), n_zones)
        for h in sc.hotspots.get(src, []):
            for r, c in h.cells():
                per_zone[r * sc.cols + c] += h.tourists
        zone_of_user = np.repeat(np.arange(n_zones), per_zone)
        n_users = zone_of_user.size
        if n_users == 0:
            continue
        hi = max(1, int(round(2 * sc.events_per_tourist - 1)))
        n_ev = rng.integers(1, hi + 1, n_users)
        user_of_event = np.repeat(np.arange(n_users), n_ev)
        zone_of_event = zone_of_user[user_of_event]
        year = rng.integers(year_lo, year_hi + 1, n_users)
        start = rng.integers(0, 350, n_users)
        day = start[user_of_event] + rng.integers(0, 7, user_of_event.size)
        x, y = _cell_points(rng, sc, zr[zone_of_event], zc[zone_of_event])
        hours = _hours(rng, src, user_of_event.size)
        minutes = rng.integers(0, 60, user_of_event.size)
        ids = np.array([f"{_PREFIX[src]}{u:07d}" for u in range(n_users)])
        truth += [(uid, "tweet" if src is Source.CHECKIN else src.value, "tourist") for uid in ids]
        kind = Source.PHOTO if src is Source.PHOTO else Source.TWEET
        columns[kind].append((src, ids[user_of_event], year[user_of_event], day, hours, minutes, x, y))

    for kind in (Source.PHOTO, Source.TWEET):
        if sc.residents == 0:
            continue
        n_users = sc.residents
        n_ev = np.full(n_users, sc.resident_events)
        user_of_event = np.repeat(np.arange(n_users), n_ev)
        first = rng.integers(0, 300, n_users)
        last = first + 30 + rng.integers(0, 35, n_users)
        frac = rng.random(user_of_event.size)
        pos = np.arange(user_of_event.size) - np.repeat(np.cumsum(n_ev) - n_ev, n_ev)
        frac[pos == 0] = 0.0
        frac[pos == 1] = 1.0
        day = first[user_of_event] + np.floor(frac * (last - first)[user_of_event]).astype(int)
        year = rng.integers(year_lo, year_hi + 1, n_users)
        zone = rng.integers(0, n_zones, user_of_event.size)
        x, y = _cell_points(rng, sc, zr[zone], zc[zone])
        hours = rng.integers(0, 24, user_of_event.size)
        minutes = rng.integers(0, 60, user_of_event.size)
        ids = np.array([f"r{_PREFIX[kind]}{u:07d}" for u in range(n_users)])
        truth += [(uid, kind.value, "resident") for uid in ids]
        columns[kind].append((kind, ids[user_of_event], year[user_of_event], day, hours, minutes, x, y))

    events = {}
    for kind, blocks in columns.items():
        lines = []
        for src, uids, years, days, hours, minutes, x, y in blocks:
            dates = ((years - 1970).astype("datetime64[Y]").astype("datetime64[D]")
                     + days.astype("timedelta64[D]"))
            dstr = np.datetime_as_string(dates, unit="D").tolist()
            if src is Source.CHECKIN:
                texts = [f', "text": "I\'m at venue {k} https://4sq.com/v{k}"' for k in range(len(uids))]
            elif kind is Source.TWEET:
                texts = [', "text": "hello madrid"'] * len(uids)
            else:
                texts = [""] * len(uids)
            lines += [
                f'{{"user": "{u}", "ts": "{d}T{h:02d}:{mi:02d}:00", "lat": {yy:.3f}, "lon": {xx:.3f}{t}}}'
                for u, d, h, mi, yy, xx, t in zip(uids.tolist(), dstr, hours.tolist(), minutes.tolist(),
                                                  y.tolist(), x.tolist(), texts)
            ]
        events[kind] = lines

    hotspots = {s.value: sc.hotspot_zone_ids(s) for s in SOURCES}
    truth.sort()
    return SynthOutput(zones, events, truth, hotspots)


def write(output, out_dir, scenario=None):
    """Write zones, event files, ground truth and a ready-to-run pipeline config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "zones.geojson", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(output.zones, fh, separators=(",", ":"))
    files = {}
    for kind, lines in output.events.items():
        if not lines:
            continue
        name = f"events_{kind.value}.ndjson"
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        files[kind.value] = name
    with open(out / "truth_labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "source", "label"])
        w.writerows(output.truth_labels)
    with open(out / "truth_hotspots.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(output.truth_hotspots, fh, indent=1, sort_keys=True)
    conf = ["zones = zones.geojson", "crs = projected"]
    conf += [f"{kind} = {name}" for kind, name in files.items()]
    if scenario is not None:
        cx = scenario.origin[0] + scenario.cols * scenario.cell_m / 2
        cy = scenario.origin[1] + scenario.rows * scenario.cell_m / 2
        conf.append(f"center = {cx!r},{cy!r}")
        conf.append(f"seed = {scenario.seed}")
    conf.append("out = run")
    (out / "pipeline.conf").write_text("\n".join(conf) + "\n", encoding="utf-8")
    return out


def generate_to(scenario, out_dir):
    return write(generate(scenario), out_dir, scenario)
