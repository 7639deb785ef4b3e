"""Vector-map types in a local east-north metric frame, plus point geometry kernels.

All geometry lives in a flat local frame: x points east, y points north,
units are meters.  WGS-84 coordinates enter only through
:func:`project_wgs84_to_local`, a local equirectangular projection around
the frame origin (accurate to well under a meter for the few-km extents
this package targets, and invertible in one line).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyMapError

EARTH_RADIUS_M = 6378137.0

SD_MODE = "sd"
HD_MODE = "hd"


@dataclass(frozen=True)
class LocalFrame:
    """Origin of the local east-north frame on the WGS-84 ellipsoid sphere."""

    origin_lat: float
    origin_lon: float
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self):
        if not (-90.0 <= self.origin_lat <= 90.0):
            raise ValueError(f"origin_lat {self.origin_lat} outside [-90, 90]")
        if not (-180.0 <= self.origin_lon <= 180.0):
            raise ValueError(f"origin_lon {self.origin_lon} outside [-180, 180]")


def project_wgs84_to_local(lat, lon, frame: LocalFrame):
    """Project WGS-84 degrees to local east-north meters.

    Equirectangular about the frame origin:
    x = R * cos(origin_lat) * (lon - origin_lon), y = R * (lat - origin_lat),
    with angle differences in radians.  Accepts scalars or arrays.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0):
        raise ValueError("latitude/longitude outside WGS-84 range")
    k = math.pi / 180.0
    x = frame.earth_radius * math.cos(frame.origin_lat * k) * ((lon - frame.origin_lon) * k)
    y = frame.earth_radius * ((lat - frame.origin_lat) * k)
    return x, y


def _as_points(arr, name: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must be an (N, 2) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


@dataclass(frozen=True, eq=False)
class Road:
    """Road centerline polyline with an optional corridor width in meters."""

    centerline: np.ndarray
    width: float | None = None

    def __post_init__(self):
        pts = _as_points(self.centerline, "centerline")
        if len(pts) < 2:
            raise ValueError("centerline needs at least 2 points")
        seg = np.diff(pts, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise ValueError("centerline has repeated consecutive points")
        if self.width is not None and not self.width > 0.0:
            raise ValueError(f"road width must be > 0, got {self.width}")
        object.__setattr__(self, "centerline", pts)
        pts.setflags(write=False)


def polygon_area(boundary: np.ndarray) -> float:
    """Unsigned shoelace area; orientation does not matter."""
    x, y = boundary[:, 0], boundary[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True, eq=False)
class Building:
    """Closed building footprint; the first vertex is not repeated as the last."""

    boundary: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.boundary, "boundary")
        if len(pts) < 3:
            raise ValueError("boundary needs at least 3 vertices")
        if np.array_equal(pts[0], pts[-1]):
            raise ValueError("closing vertex must not repeat the first vertex")
        if polygon_area(pts) == 0.0:
            raise ValueError("polygon has zero area")
        object.__setattr__(self, "boundary", pts)
        pts.setflags(write=False)


@dataclass(frozen=True, eq=False)
class VectorMap:
    """Roads and building footprints in one local frame.

    mode "hd" means every road carries an explicit corridor width (derived
    from drivable-area geometry); mode "sd" allows unset widths, in which
    case a global default is supplied at rasterization time.
    """

    frame: LocalFrame
    roads: tuple[Road, ...] = ()
    buildings: tuple[Building, ...] = ()
    mode: str = SD_MODE

    def __post_init__(self):
        object.__setattr__(self, "roads", tuple(self.roads))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if self.mode not in (SD_MODE, HD_MODE):
            raise ValueError(f"mode must be 'sd' or 'hd', got {self.mode!r}")
        if self.mode == HD_MODE and any(r.width is None for r in self.roads):
            raise ValueError("hd mode requires a width on every road")


def map_bounds(vmap: VectorMap, sd_width: float | None = None):
    """Tight (xmin, ymin, xmax, ymax) over roads (inflated by half their
    effective width) and building vertices.

    Roads without a width use sd_width when given, else contribute their
    bare vertices.
    """
    if not vmap.roads and not vmap.buildings:
        raise EmptyMapError("map has no roads and no buildings")
    lo = np.array([np.inf, np.inf])
    hi = np.array([-np.inf, -np.inf])
    for road in vmap.roads:
        w = road.width if road.width is not None else sd_width
        half = 0.5 * w if w is not None else 0.0
        lo = np.minimum(lo, road.centerline.min(axis=0) - half)
        hi = np.maximum(hi, road.centerline.max(axis=0) + half)
    for b in vmap.buildings:
        lo = np.minimum(lo, b.boundary.min(axis=0))
        hi = np.maximum(hi, b.boundary.max(axis=0))
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


# ---------------------------------------------------------------------------
# Point-set occupancy kernels.  Rasterization and ego-frame rendering both
# call these on their own point sets, so the two paths share one predicate.
# ---------------------------------------------------------------------------

_BOUNDARY_EPS = 1e-9  # meters; boundary-coincident points count as inside


def _effective_width(road: Road, sd_width: float | None) -> float:
    if road.width is not None:
        return road.width
    if sd_width is None:
        raise ConfigError("road has no width and no sd_width was given")
    if not sd_width > 0.0:
        raise ConfigError(f"sd_width must be > 0, got {sd_width}")
    return sd_width


def mask_near_roads(px: np.ndarray, py: np.ndarray, roads, sd_width: float | None = None) -> np.ndarray:
    """Boolean mask: point within half the effective width of any centerline
    segment (round caps and joins, boundary inclusive)."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    hit = np.zeros(px.shape, dtype=bool)
    for road in roads:
        half = 0.5 * _effective_width(road, sd_width)
        pts = road.centerline
        for s in range(len(pts) - 1):
            ax, ay = pts[s]
            bx, by = pts[s + 1]
            # bbox prefilter, inflated by the corridor half width
            cand = np.nonzero(
                (px >= min(ax, bx) - half) & (px <= max(ax, bx) + half)
                & (py >= min(ay, by) - half) & (py <= max(ay, by) + half)
                & ~hit
            )[0]
            if cand.size == 0:
                continue
            dx, dy = bx - ax, by - ay
            qx = px[cand] - ax
            qy = py[cand] - ay
            t = np.clip((qx * dx + qy * dy) / (dx * dx + dy * dy), 0.0, 1.0)
            d2 = (qx - t * dx) ** 2 + (qy - t * dy) ** 2
            hit[cand[d2 <= half * half]] = True
    return hit


def _on_polygon_edge(px, py, poly) -> np.ndarray:
    on = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for s in range(n):
        ax, ay = poly[s]
        bx, by = poly[(s + 1) % n]
        dx, dy = bx - ax, by - ay
        qx = px - ax
        qy = py - ay
        t = np.clip((qx * dx + qy * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        d2 = (qx - t * dx) ** 2 + (qy - t * dy) ** 2
        on |= d2 <= _BOUNDARY_EPS * _BOUNDARY_EPS
    return on


def mask_in_buildings(px: np.ndarray, py: np.ndarray, buildings) -> np.ndarray:
    """Boolean mask: point inside any footprint under the even-odd rule;
    points on a polygon edge count as inside."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    hit = np.zeros(px.shape, dtype=bool)
    for building in buildings:
        poly = building.boundary
        lo = poly.min(axis=0)
        hi = poly.max(axis=0)
        cand = np.nonzero(
            (px >= lo[0] - _BOUNDARY_EPS) & (px <= hi[0] + _BOUNDARY_EPS)
            & (py >= lo[1] - _BOUNDARY_EPS) & (py <= hi[1] + _BOUNDARY_EPS)
            & ~hit
        )[0]
        if cand.size == 0:
            continue
        cx = px[cand]
        cy = py[cand]
        inside = np.zeros(cand.shape, dtype=bool)
        n = len(poly)
        for s in range(n):
            ax, ay = poly[s]
            bx, by = poly[(s + 1) % n]
            crosses = (ay > cy) != (by > cy)
            if not np.any(crosses):
                continue
            x_int = ax + (cy - ay) * (bx - ax) / (by - ay)
            inside ^= crosses & (cx < x_int)
        inside |= _on_polygon_edge(cx, cy, poly)
        hit[cand[inside]] = True
    return hit


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def vector_map_to_dict(vmap: VectorMap) -> dict:
    return {
        "frame": {"origin_lat": vmap.frame.origin_lat, "origin_lon": vmap.frame.origin_lon},
        "mode": vmap.mode,
        "roads": [
            {"centerline": r.centerline.tolist(), "width": r.width} for r in vmap.roads
        ],
        "buildings": [{"boundary": b.boundary.tolist()} for b in vmap.buildings],
    }


def vector_map_from_dict(obj: dict) -> VectorMap:
    frame = LocalFrame(float(obj["frame"]["origin_lat"]), float(obj["frame"]["origin_lon"]))
    roads = tuple(
        Road(np.asarray(r["centerline"], dtype=float),
             None if r.get("width") is None else float(r["width"]))
        for r in obj.get("roads", [])
    )
    buildings = tuple(Building(np.asarray(b["boundary"], dtype=float)) for b in obj.get("buildings", []))
    return VectorMap(frame=frame, roads=roads, buildings=buildings, mode=obj.get("mode", SD_MODE))


def save_vector_map(vmap: VectorMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(vector_map_to_dict(vmap), fh)
        fh.write("\n")


def load_vector_map(path) -> VectorMap:
    with open(path, "r", encoding="utf-8") as fh:
        return vector_map_from_dict(json.load(fh))
