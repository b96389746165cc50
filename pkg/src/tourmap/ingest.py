"""Reading geolocated event logs (NDJSON) and splitting check-ins from tweets.

Each non-blank line of an event file is a JSON object::

    {"user": "u1", "ts": "2013-05-04T10:00:00", "lat": 40.4168, "lon": -3.7038,
     "text": "optional", "src": "optional source override"}

In projected mode ``lon``/``lat`` hold x/y in metres.
"""

import enum
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Optional

from .errors import DataError


class Source(str, enum.Enum):
    PHOTO = "photo"
    CHECKIN = "checkin"
    TWEET = "tweet"

    def __str__(self):
        return self.value


class CrsMode(str, enum.Enum):
    GEOGRAPHIC = "geographic"
    PROJECTED = "projected"

    def __str__(self):
        return self.value


@dataclass(frozen=True, slots=True)
class EventRecord:
    source: Source
    user_id: str
    timestamp: datetime
    lon: float
    lat: float
    text: Optional[str] = None


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    rejection_reasons: list = field(default_factory=list)

    def reject(self, line_number, reason):
        self.rejected += 1
        self.rejection_reasons.append((line_number, reason))

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejection_reasons": [list(r) for r in self.rejection_reasons],
        }


def parse_timestamp(value):
    """Parse an ISO-8601 string as local wall-clock time.

    A trailing ``Z`` or UTC offset is dropped without conversion.
    """
    if not isinstance(value, str) or not value:
        raise ValueError("timestamp must be a non-empty string")
    if value.endswith(("Z", "z")):
        value = value[:-1]
    ts = datetime.fromisoformat(value)
    return ts.replace(tzinfo=None)


def _record_from_obj(obj, source, crs_mode):
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in ("user", "ts", "lat", "lon"):
        if key not in obj:
            raise ValueError(f"missing field: {key}")
    user = obj["user"]
    if isinstance(user, (int,)) and not isinstance(user, bool):
        user = str(user)
    if not isinstance(user, str) or not user.strip():
        raise ValueError("empty user")
    try:
        ts = parse_timestamp(obj["ts"])
    except (TypeError, ValueError):
        raise ValueError("invalid timestamp") from None
    lat, lon = obj["lat"], obj["lon"]
    if isinstance(lat, bool) or isinstance(lon, bool):
        raise ValueError("non-numeric coordinate")
    try:
        lat = float(lat)
        lon = float(lon)
    except (TypeError, ValueError):
        raise ValueError("non-numeric coordinate") from None
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError("non-finite coordinate")
    if crs_mode is CrsMode.GEOGRAPHIC and not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValueError("coordinate out of range")
    src = obj.get("src")
    if src is not None:
        try:
            source = Source(src)
        except ValueError:
            raise ValueError(f"invalid source: {src!r}") from None
    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        text = str(text)
    return EventRecord(source, user, ts, lon, lat, text)


def parse_lines(lines: Iterable[str], source, crs_mode="geographic"):
    """Parse NDJSON lines; see :func:`parse_events`."""
    source = Source(source)
    crs_mode = CrsMode(crs_mode)
    records = []
    report = IngestReport()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.reject(number, "invalid json")
            continue
        try:
            rec = _record_from_obj(obj, source, crs_mode)
        except ValueError as exc:
            report.reject(number, str(exc))
            continue
        records.append(rec)
        report.accepted += 1
    return records, report


def parse_events(path, source, crs_mode="geographic"):
    """Read an NDJSON event file.

    Parameters
    ----------
    path : str or Path
        UTF-8 file, one JSON record per line. Blank lines are skipped.
    source : Source or str
        Source assigned to records lacking an ``src`` field.
    crs_mode : {'geographic', 'projected'}
        Geographic mode enforces latitude/longitude ranges.

    Returns
    -------
    records : list of EventRecord
        Accepted records in file order.
    report : IngestReport
        Accepted/rejected counts with ``(line_number, reason)`` per rejection.

    Raises
    ------
    DataError
        If the file cannot be read. Malformed lines are only rejected.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_lines(fh, source, crs_mode)
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read event file {path}: {exc}") from exc


DEFAULT_CHECKIN_PATTERN = r"4sq\.com|swarmapp\.com"


def checkin_predicate(pattern=None) -> Callable[[EventRecord], bool]:
    """Build a check-in detector matching ``pattern`` in the tweet text."""
    rx = re.compile(pattern or DEFAULT_CHECKIN_PATTERN, re.IGNORECASE)
    return lambda rec: rec.text is not None and rx.search(rec.text) is not None


def split_checkins(tweets, predicate=None):
    """Partition tweets into (checkins, ordinary); check-ins get source=checkin."""
    if predicate is None:
        predicate = checkin_predicate()
    checkins, ordinary = [], []
    for rec in tweets:
        if predicate(rec):
            checkins.append(EventRecord(Source.CHECKIN, rec.user_id, rec.timestamp,
                                        rec.lon, rec.lat, rec.text))
        else:
            ordinary.append(rec)
    return checkins, ordinary


def record_to_json(rec: EventRecord) -> str:
    obj = {
        "user": rec.user_id,
        "ts": rec.timestamp.isoformat(),
        "lat": rec.lat,
        "lon": rec.lon,
        "src": rec.source.value,
    }
    if rec.text is not None:
        obj["text"] = rec.text
    return json.dumps(obj, ensure_ascii=False)


def write_events(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_json(rec))
            fh.write("\n")
