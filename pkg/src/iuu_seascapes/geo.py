"""EEZ boundary geometry: containment, great-circle distance, buffer zones.

Coordinates are WGS84 degrees. On disk (GeoJSON) positions are ``[lon, lat]``;
in memory everything is addressed as ``(lat, lon)``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ArgumentError, MalformedGeometryError, ValidationError

EARTH_RADIUS_KM = 6371.0088
KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0

# Distances below this are treated as "on the boundary".
_ON_BOUNDARY_KM = 1e-9
_ON_BOUNDARY_DEG = 1e-12
_CHUNK = 4096


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ArgumentError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ArgumentError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ArgumentError(f"longitude {self.lon} outside [-180, 180]")


class Zone(enum.Enum):
    OUTSIDE = "outside"
    INSIDE_BEYOND_BUFFER = "inside_beyond_buffer"
    INSIDE_WITHIN_BUFFER = "inside_within_buffer"


@dataclass(frozen=True)
class EezGeometry:
    """One or more closed rings. Rings are combined with the even-odd rule."""

    rings: tuple[tuple[GeoPoint, ...], ...]
    name: str = "EEZ"

    def __post_init__(self):
        rings = tuple(tuple(r) for r in self.rings)
        object.__setattr__(self, "rings", rings)
        if not rings or sum(len(r) for r in rings) == 0:
            raise ValidationError("geometry has no vertices")
        for i, ring in enumerate(rings):
            if len(ring) < 4:
                raise ValidationError(f"ring {i} has {len(ring)} positions; at least 4 required")
            if ring[0] != ring[-1]:
                raise ValidationError(f"ring {i} is not closed (first position != last)")
            if len(set(ring[:-1])) < 3:
                raise ValidationError(f"ring {i} has fewer than 3 distinct vertices")
            for a, b in zip(ring, ring[1:]):
                if abs(a.lon - b.lon) > 180.0:
                    raise ValidationError(f"ring {i} crosses the antimeridian")

    @cached_property
    def segments(self) -> np.ndarray:
        """(m, 4) array of segments as lat1, lon1, lat2, lon2."""
        segs = []
        for ring in self.rings:
            for a, b in zip(ring, ring[1:]):
                if a != b:
                    segs.append((a.lat, a.lon, b.lat, b.lon))
        return np.array(segs, dtype=float)

    @cached_property
    def vertices(self) -> np.ndarray:
        """(k, 2) array of distinct ring vertices as lat, lon."""
        pts = sorted({(p.lat, p.lon) for ring in self.rings for p in ring})
        return np.array(pts, dtype=float)

    def vertex_count(self) -> int:
        return sum(len(r) for r in self.rings)

    def bounds(self):
        v = self.vertices
        return v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max()


# ---------------------------------------------------------------- loading

def _parse_ring(coords, where):
    if not isinstance(coords, list):
        raise ValidationError(f"{where}: ring is not a list of positions")
    ring = []
    for pos in coords:
        if not isinstance(pos, list) or len(pos) < 2:
            raise ValidationError(f"{where}: bad position {pos!r}")
        lon, lat = float(pos[0]), float(pos[1])
        try:
            ring.append(GeoPoint(lat, lon))
        except ArgumentError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return tuple(ring)


def _collect_rings(obj, out, where="geometry"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValidationError(f"{where}: not a GeoJSON object")
    kind = obj["type"]
    if kind == "FeatureCollection":
        for i, feat in enumerate(obj.get("features", [])):
            _collect_rings(feat, out, f"features[{i}]")
    elif kind == "Feature":
        geom = obj.get("geometry")
        if geom is None:
            raise ValidationError(f"{where}: feature has no geometry")
        _collect_rings(geom, out, where)
    elif kind == "Polygon":
        for j, ring in enumerate(obj.get("coordinates", [])):
            out.append(_parse_ring(ring, f"{where} ring {j}"))
    elif kind == "MultiPolygon":
        for i, poly in enumerate(obj.get("coordinates", [])):
            for j, ring in enumerate(poly):
                out.append(_parse_ring(ring, f"{where} polygon {i} ring {j}"))
    else:
        raise ValidationError(f"{where}: unsupported geometry type {kind!r}; expected Polygon or MultiPolygon")


def parse_eez(text: str, name: str = "EEZ") -> EezGeometry:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise MalformedGeometryError(f"invalid GeoJSON: {exc.msg}", offset) from None
    rings = []
    _collect_rings(obj, rings)
    if not rings:
        raise ValidationError("no polygon rings found")
    if isinstance(obj, dict) and obj.get("type") == "Feature":
        name = (obj.get("properties") or {}).get("name", name)
    return EezGeometry(tuple(rings), name)


def load_eez(path) -> EezGeometry:
    path = Path(path)
    return parse_eez(path.read_text(encoding="utf-8"), name=path.stem)


def eez_to_geojson(g: EezGeometry) -> str:
    coords = [[[[p.lon, p.lat] for p in ring]] for ring in g.rings]
    feature = {
        "type": "Feature",
        "properties": {"name": g.name},
        "geometry": {"type": "MultiPolygon", "coordinates": coords},
    }
    return json.dumps(feature, indent=1) + "\n"


# ---------------------------------------------------------------- queries

def _as_arrays(lats, lons):
    lats = np.atleast_1d(np.asarray(lats, dtype=float))
    lons = np.atleast_1d(np.asarray(lons, dtype=float))
    if lats.shape != lons.shape:
        raise ArgumentError("lat and lon arrays differ in shape")
    return lats, lons


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    return float(haversine_many(a.lat, a.lon, b.lat, b.lon))


def haversine_many(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def _on_segments_deg(py, px, segs):
    """Planar point-to-segment distance in degree space, (n, m) -> min over m."""
    y1, x1, y2, x2 = (segs[:, i][None, :] for i in range(4))
    dx, dy = x2 - x1, y2 - y1
    ax, ay = px[:, None] - x1, py[:, None] - y1
    t = np.clip((ax * dx + ay * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    ex, ey = ax - t * dx, ay - t * dy
    return np.sqrt(ex * ex + ey * ey).min(axis=1)


def contains_many(g: EezGeometry, lats, lons) -> np.ndarray:
    """Even-odd ray casting for many points; boundary points count as inside."""
    lats, lons = _as_arrays(lats, lons)
    segs = g.segments
    out = np.empty(lats.shape, dtype=bool)
    y1, x1, y2, x2 = (segs[:, i][None, :] for i in range(4))
    for s in range(0, lats.size, _CHUNK):
        py = lats[s:s + _CHUNK][:, None]
        px = lons[s:s + _CHUNK][:, None]
        straddles = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        crossings = np.count_nonzero(straddles & (px < x_cross), axis=1)
        inside = (crossings % 2) == 1
        on_edge = _on_segments_deg(py[:, 0], px[:, 0], segs) <= _ON_BOUNDARY_DEG
        out[s:s + _CHUNK] = inside | on_edge
    return out


def point_in_polygon(p: GeoPoint, g: EezGeometry) -> bool:
    return bool(contains_many(g, p.lat, p.lon)[0])


def distance_many_km(g: EezGeometry, lats, lons) -> np.ndarray:
    """Distance from each point to the nearest boundary segment.

    The nearest point on each segment is found in an equirectangular
    projection centred on the query point; the reported distance is the
    great-circle distance to that foot point (and to every vertex).
    """
    lats, lons = _as_arrays(lats, lons)
    segs = g.segments
    verts = g.vertices
    out = np.empty(lats.shape, dtype=float)
    for s in range(0, lats.size, _CHUNK):
        plat = lats[s:s + _CHUNK][:, None]
        plon = lons[s:s + _CHUNK][:, None]
        sx = np.cos(np.radians(plat)) * KM_PER_DEGREE
        sy = KM_PER_DEGREE
        ax = (segs[None, :, 1] - plon) * sx
        ay = (segs[None, :, 0] - plat) * sy
        bx = (segs[None, :, 3] - plon) * sx
        by = (segs[None, :, 2] - plat) * sy
        dx, dy = bx - ax, by - ay
        t = np.clip(-(ax * dx + ay * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        foot_lat = plat + (ay + t * dy) / sy
        foot_lon = plon + (ax + t * dx) / sx
        d_seg = haversine_many(plat, plon, foot_lat, foot_lon).min(axis=1)
        d_vert = haversine_many(plat, plon, verts[None, :, 0], verts[None, :, 1]).min(axis=1)
        out[s:s + _CHUNK] = np.minimum(d_seg, d_vert)
    out[out < _ON_BOUNDARY_KM] = 0.0
    return out


def distance_to_boundary_km(p: GeoPoint, g: EezGeometry) -> float:
    return float(distance_many_km(g, p.lat, p.lon)[0])


def classify_zone(p: GeoPoint, g: EezGeometry, buffer_km: float) -> Zone:
    if buffer_km < 0:
        raise ArgumentError(f"buffer_km must be >= 0, got {buffer_km}")
    if not point_in_polygon(p, g):
        return Zone.OUTSIDE
    if buffer_km > 0 and distance_to_boundary_km(p, g) <= buffer_km:
        return Zone.INSIDE_WITHIN_BUFFER
    return Zone.INSIDE_BEYOND_BUFFER


def classify_many(g: EezGeometry, lats, lons, buffer_km: float):
    """Vectorized :func:`classify_zone`; returns an array of :class:`Zone`."""
    if buffer_km < 0:
        raise ArgumentError(f"buffer_km must be >= 0, got {buffer_km}")
    inside = contains_many(g, lats, lons)
    dist = distance_many_km(g, lats, lons)
    within = inside & (dist <= buffer_km) & (buffer_km > 0)
    zones = np.full(inside.shape, Zone.OUTSIDE, dtype=object)
    zones[inside] = Zone.INSIDE_BEYOND_BUFFER
    zones[within] = Zone.INSIDE_WITHIN_BUFFER
    return zones
