"""Tourist / resident labelling from the yearly span of each user's activity."""

import csv
import enum
from dataclasses import dataclass

from .errors import DataError
from .ingest import Source


class Label(str, enum.Enum):
    TOURIST = "tourist"
    RESIDENT = "resident"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class UserLabel:
    user_id: str
    source: Source
    label: Label
    yearly_spans: tuple  # ((year, span_days), ...) sorted by year

    @property
    def max_span_days(self):
        return max(span for _, span in self.yearly_spans)


def yearly_spans(events):
    """Map (user_id, source) -> {year: (first_ordinal, last_ordinal)}."""
    spans = {}
    for e in events:
        key = (e.user_id, e.source)
        years = spans.get(key)
        if years is None:
            years = spans[key] = {}
        d = e.timestamp.toordinal()
        y = e.timestamp.year
        lo_hi = years.get(y)
        if lo_hi is None:
            years[y] = (d, d)
        elif d < lo_hi[0]:
            years[y] = (d, lo_hi[1])
        elif d > lo_hi[1]:
            years[y] = (lo_hi[0], d)
    return spans


def label_users(events, threshold_days=7):
    """Label every (user, source) pair.

    The span of a calendar year is the number of whole days between the
    first and last event date in that year (hours ignored). A user is a
    resident if any active year spans more than ``threshold_days``,
    otherwise a tourist, so a span of exactly ``threshold_days`` is still a
    tourist.

    Returns labels sorted by (source, user_id).
    """
    if threshold_days < 1:
        raise ValueError("threshold_days must be >= 1")
    labels = []
    for (user, source), years in yearly_spans(events).items():
        spans = tuple(sorted((y, hi - lo) for y, (lo, hi) in years.items()))
        resident = any(s > threshold_days for _, s in spans)
        labels.append(UserLabel(user, source, Label.RESIDENT if resident else Label.TOURIST, spans))
    labels.sort(key=lambda lab: (lab.source.value, lab.user_id))
    return labels


def filter_tourist_events(events, labels):
    """Events whose (user, source) is labelled tourist, in input order."""
    lookup = {(lab.user_id, lab.source): lab.label for lab in labels}
    out = []
    for e in events:
        label = lookup.get((e.user_id, e.source))
        if label is None:
            raise DataError(f"no label for user {e.user_id!r} in source {e.source.value}")
        if label is Label.TOURIST:
            out.append(e)
    return out


def write_labels(path, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "source", "label", "max_span_days"])
        for lab in labels:
            w.writerow([lab.user_id, lab.source.value, lab.label.value, lab.max_span_days])


def read_labels(path):
    """Read a labels CSV; yearly spans collapse to a single (0, max) entry."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(UserLabel(row["user_id"], Source(row["source"]), Label(row["label"]),
                                 ((0, int(row["max_span_days"])),)))
    return out
