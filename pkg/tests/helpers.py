"""Small builders shared by the test modules."""

from datetime import datetime

import numpy as np

from tourmap.ingest import EventRecord, Source


def square(x0, y0, size):
    return [[x0, y0], [x0 + size, y0], [x0 + size, y0 + size], [x0, y0 + size], [x0, y0]]


def feature(zid, rings, **props):
    return {"type": "Feature", "properties": {"id": zid, **props},
            "geometry": {"type": "Polygon", "coordinates": rings}}


def collection(features):
    return {"type": "FeatureCollection", "features": list(features)}


def grid_points(rows, cols, cell=200.0):
    return np.array([((c + 0.5) * cell, (r + 0.5) * cell) for r in range(rows) for c in range(cols)])


def event(user, ts, x=0.0, y=0.0, source=Source.PHOTO, text=None):
    return EventRecord(source, user, datetime.fromisoformat(ts), x, y, text)
