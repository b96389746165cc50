"""Zone polygons: loading, area and centroid, point assignment, distances."""

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .errors import DataError
from .ingest import CrsMode

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class Zone:
    """A polygonal zone.

    ``polygons`` holds one entry per polygon part; each part is a list of
    closed rings (outer ring first, then holes) as (k, 2) float arrays.
    """

    zone_id: str
    polygons: tuple
    area_ha: float
    centroid: tuple

    @property
    def rings(self):
        return [ring for part in self.polygons for ring in part]

    @property
    def bbox(self):
        pts = np.vstack([part[0] for part in self.polygons])
        return (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))


@dataclass(frozen=True)
class PointAssignment:
    event_index: int
    zone_id: Optional[str]


def _shoelace(ring):
    x, y = ring[:-1, 0], ring[:-1, 1]
    x2, y2 = ring[1:, 0], ring[1:, 1]
    cross = x * y2 - x2 * y
    a = 0.5 * cross.sum()
    if a == 0.0:
        return 0.0, 0.0, 0.0
    cx = ((x + x2) * cross).sum() / (6.0 * a)
    cy = ((y + y2) * cross).sum() / (6.0 * a)
    return a, cx, cy


def area_centroid(polygons):
    """Planar area and area-weighted centroid; holes subtract.

    Orientation of the input rings is ignored: the first ring of each part
    counts positive, the rest negative.
    """
    total = sx = sy = 0.0
    for part in polygons:
        for k, ring in enumerate(part):
            a, cx, cy = _shoelace(ring)
            a = abs(a) if k == 0 else -abs(a)
            total += a
            sx += a * cx
            sy += a * cy
    if total <= 0.0:
        return 0.0, (math.nan, math.nan)
    return total, (sx / total, sy / total)


def _local_projection(polygons):
    lat0 = float(np.mean(np.vstack([r for part in polygons for r in part])[:, 1]))
    kx = math.radians(1.0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    ky = math.radians(1.0) * EARTH_RADIUS_M
    return kx, ky


def _parse_rings(coords, zid):
    rings = []
    for raw in coords:
        ring = np.asarray(raw, dtype=np.float64)
        if ring.ndim != 2 or ring.shape[0] < 4 or ring.shape[1] < 2:
            raise DataError(f"zone {zid}: ring needs at least 4 positions")
        ring = np.ascontiguousarray(ring[:, :2])
        if not np.array_equal(ring[0], ring[-1]):
            raise DataError(f"zone {zid}: unclosed ring")
        if not np.isfinite(ring).all():
            raise DataError(f"zone {zid}: non-finite coordinate")
        rings.append(ring)
    if not rings:
        raise DataError(f"zone {zid}: empty polygon")
    return rings


def zone_from_feature(feature, crs_mode="projected"):
    crs_mode = CrsMode(crs_mode)
    props = feature.get("properties") or {}
    if "id" not in props or props["id"] is None:
        raise DataError("zone feature without an 'id' property")
    zid = str(props["id"])
    geom = feature.get("geometry") or {}
    gtype = geom.get("type")
    if gtype == "Polygon":
        parts = [geom["coordinates"]]
    elif gtype == "MultiPolygon":
        parts = geom["coordinates"]
    else:
        raise DataError(f"zone {zid}: unsupported geometry type {gtype!r}")
    polygons = tuple(tuple(_parse_rings(p, zid)) for p in parts)

    if crs_mode is CrsMode.PROJECTED:
        area_m2, centroid = area_centroid(polygons)
    else:
        kx, ky = _local_projection(polygons)
        local = [[r * (kx, ky) for r in part] for part in polygons]
        area_m2, (cx, cy) = area_centroid(local)
        centroid = (cx / kx, cy / ky)
    if not area_m2 > 0.0:
        raise DataError(f"zone {zid}: zero-area polygon")

    area_ha = props.get("area_ha")
    if area_ha is None:
        area_ha = area_m2 / 10_000.0
    else:
        area_ha = float(area_ha)
        if not area_ha > 0.0:
            raise DataError(f"zone {zid}: area_ha must be positive")
    zone = Zone(zid, polygons, area_ha, (float(centroid[0]), float(centroid[1])))
    x0, y0, x1, y1 = zone.bbox
    if not (x0 <= zone.centroid[0] <= x1 and y0 <= zone.centroid[1] <= y1):
        raise DataError(f"zone {zid}: centroid outside bounding box")
    return zone


def zones_from_geojson(obj, crs_mode="projected"):
    if obj.get("type") != "FeatureCollection":
        raise DataError("zones file is not a GeoJSON FeatureCollection")
    zones = []
    seen = set()
    for feature in obj.get("features", []):
        zone = zone_from_feature(feature, crs_mode)
        if zone.zone_id in seen:
            raise DataError(f"duplicate zone id {zone.zone_id}")
        seen.add(zone.zone_id)
        zones.append(zone)
    if not zones:
        raise DataError("zones file contains no features")
    return zones


def load_zones(path, crs_mode="projected"):
    """Load a GeoJSON FeatureCollection of Polygon/MultiPolygon zones.

    ``area_ha`` comes from the feature property when present; otherwise it
    is the shoelace area (geographic mode: after an equirectangular
    projection at the polygon's mean latitude) in hectares.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read zones file {path}: {exc}") from exc
    return zones_from_geojson(obj, crs_mode)


def zones_to_geojson(zones, properties=None):
    """FeatureCollection of ``zones``; ``properties[zone_id]`` adds fields."""
    features = []
    for z in zones:
        props = {"id": z.zone_id, "area_ha": z.area_ha,
                 "centroid_x": z.centroid[0], "centroid_y": z.centroid[1]}
        if properties and z.zone_id in properties:
            props.update(properties[z.zone_id])
        coords = [[ring.tolist() for ring in part] for part in z.polygons]
        if len(coords) == 1:
            geom = {"type": "Polygon", "coordinates": coords[0]}
        else:
            geom = {"type": "MultiPolygon", "coordinates": coords}
        features.append({"type": "Feature", "properties": props, "geometry": geom})
    return {"type": "FeatureCollection", "features": features}


class ZoneIndex:
    """Flattened ring arrays plus a uniform grid over zone bounding boxes.

    Zones are tried in ascending ``zone_id`` order so that a point on a
    shared boundary goes to the lexicographically smallest id.
    """

    def __init__(self, zones, cells_per_zone=1.0):
        self.zones = zones
        self.rank_order = np.array(sorted(range(len(zones)), key=lambda i: zones[i].zone_id),
                                   dtype=np.int64)
        vx, vy, ring_ptr, zone_ring_ptr = [], [], [0], [0]
        for z in zones:
            for ring in z.rings:
                vx.append(ring[:, 0])
                vy.append(ring[:, 1])
                ring_ptr.append(ring_ptr[-1] + len(ring))
            zone_ring_ptr.append(len(ring_ptr) - 1)
        self.vx = np.ascontiguousarray(np.concatenate(vx))
        self.vy = np.ascontiguousarray(np.concatenate(vy))
        self.ring_ptr = np.array(ring_ptr, dtype=np.int64)
        self.zone_ring_ptr = np.array(zone_ring_ptr, dtype=np.int64)
        self.bbox = np.array([z.bbox for z in zones], dtype=np.float64)

        x0, y0 = self.bbox[:, 0].min(), self.bbox[:, 1].min()
        x1, y1 = self.bbox[:, 2].max(), self.bbox[:, 3].max()
        span = max(x1 - x0, y1 - y0)
        target = max(1, int(math.sqrt(len(zones) * cells_per_zone)))
        cell = span / target if span > 0 else 1.0
        nx = max(1, int(math.ceil((x1 - x0) / cell)))
        ny = max(1, int(math.ceil((y1 - y0) / cell)))
        self.gx0, self.gy0, self.cell, self.nx, self.ny = float(x0), float(y0), float(cell), nx, ny

        buckets = [[] for _ in range(nx * ny)]
        for zi in self.rank_order:
            bx0, by0, bx1, by1 = self.bbox[zi]
            cx0, cx1 = self._cell_range(bx0, bx1, self.gx0, nx)
            cy0, cy1 = self._cell_range(by0, by1, self.gy0, ny)
            for cy in range(cy0, cy1 + 1):
                for cx in range(cx0, cx1 + 1):
                    buckets[cy * nx + cx].append(zi)
        self.cell_ptr = np.zeros(nx * ny + 1, dtype=np.int64)
        self.cell_ptr[1:] = np.cumsum([len(b) for b in buckets])
        self.cell_zones = np.array([z for b in buckets for z in b], dtype=np.int64)

    def _cell_range(self, lo, hi, origin, count):
        # same float expression as the kernels so edge points hit the same cell
        a = min(int((lo - origin) / self.cell), count - 1)
        b = min(int((hi - origin) / self.cell), count - 1)
        return a, b

    def assign_xy(self, x, y, backend=None):
        """Zone position (index into ``zones``) per point, -1 if uncovered."""
        fn = _backend.get("assign_indexed", backend)
        px = np.ascontiguousarray(x, dtype=np.float64)
        py = np.ascontiguousarray(y, dtype=np.float64)
        return fn(px, py, self.zone_ring_ptr, self.ring_ptr, self.vx, self.vy, self.bbox,
                  self.gx0, self.gy0, self.cell, self.nx, self.ny, self.cell_ptr, self.cell_zones)


def point_in_zone(x, y, zone):
    """Even-odd containment with boundary points counted as inside."""
    inside = False
    for ring in zone.rings:
        for v in range(len(ring) - 1):
            x1, y1 = ring[v]
            x2, y2 = ring[v + 1]
            cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
            if cross == 0.0 and min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2):
                return True
            if (y1 > y) != (y2 > y) and x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
                inside = not inside
    return inside


def assign_xy_naive(x, y, zones):
    """O(n*m) scan; zone positions per point, -1 if uncovered."""
    order = sorted(range(len(zones)), key=lambda i: zones[i].zone_id)
    out = np.full(len(x), -1, dtype=np.int64)
    for p, (px, py) in enumerate(zip(x, y)):
        for zi in order:
            if point_in_zone(float(px), float(py), zones[zi]):
                out[p] = zi
                break
    return out


def assign_points(events, zones, method="index", backend=None, index=None):
    """Map each event to the unique zone containing it.

    Parameters
    ----------
    events : sequence of EventRecord
    zones : list of Zone
    method : {'index', 'naive'}
        Grid-indexed kernel or the brute-force scan; results are identical.
    index : ZoneIndex, optional
        Reuse a prebuilt index.

    Returns
    -------
    list of PointAssignment
    """
    x = np.fromiter((e.lon for e in events), dtype=np.float64, count=len(events))
    y = np.fromiter((e.lat for e in events), dtype=np.float64, count=len(events))
    if method == "naive":
        pos = assign_xy_naive(x, y, zones)
    elif method == "index":
        pos = (index or ZoneIndex(zones)).assign_xy(x, y, backend=backend)
    else:
        raise ValueError(f"unknown method {method!r}")
    return [PointAssignment(i, zones[p].zone_id if p >= 0 else None) for i, p in enumerate(pos)]


def drop_report(assignments):
    dropped = [a.event_index for a in assignments if a.zone_id is None]
    return {"assigned": len(assignments) - len(dropped), "unassigned": len(dropped)}


def haversine(lon1, lat1, lon2, lat2):
    """Great-circle distance in metres (arrays broadcast)."""
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def distance(p, q, crs_mode="projected"):
    """Distance in metres between coordinate pairs ``p`` and ``q``."""
    if CrsMode(crs_mode) is CrsMode.GEOGRAPHIC:
        return float(haversine(p[0], p[1], q[0], q[1]))
    return math.hypot(q[0] - p[0], q[1] - p[1])


def centroid_array(zones):
    return np.array([z.centroid for z in zones], dtype=np.float64)
