"""Planar polygon primitives, minimum rotated rectangles, and the canonical
block frame used to normalize every layout.

Polygons are stored open (the first vertex is not repeated at the end) and
counter-clockwise; clockwise input is auto-reversed with a warning. Boolean
operations are delegated to shapely; area, hulls, rotated rectangles and the
canonical frame are computed here so that tie-breaking stays deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
import shapely.geometry as sgeom

from .config import GEOM_EPS
from .errors import InvalidGeometry

__all__ = [
    "Polygon",
    "CanonicalFrame",
    "polygon_area",
    "intersection_area",
    "polygon_iou",
    "min_rotated_rect",
    "canonical_frame",
    "to_canonical",
    "from_canonical",
    "convex_hull",
]


class Polygon:
    """A simple closed CCW ring in world meters.

    ``vertices`` is a tuple of ``(x, y)`` floats; the closing edge back to the
    first vertex is implicit.
    """

    __slots__ = ("vertices", "__dict__")

    def __init__(self, vertices: Iterable[Sequence[float]]):
        pts = [(float(x), float(y)) for x, y in vertices]
        if pts and pts[0] == pts[-1]:
            pts = pts[:-1]
        # drop consecutive duplicates
        cleaned: list[tuple[float, float]] = []
        for p in pts:
            if not cleaned or _dist2(p, cleaned[-1]) > GEOM_EPS**2:
                cleaned.append(p)
        if len(cleaned) > 1 and _dist2(cleaned[0], cleaned[-1]) <= GEOM_EPS**2:
            cleaned.pop()
        if len(cleaned) < 3:
            raise InvalidGeometry(f"ring needs >= 3 distinct vertices, got {len(cleaned)}")
        signed = _signed_area(cleaned)
        scale = max(abs(c) for p in cleaned for c in p) or 1.0
        if abs(signed) <= GEOM_EPS * scale * scale:
            raise InvalidGeometry("degenerate ring: vertices are collinear")
        if signed < 0:
            warnings.warn("clockwise ring auto-reversed to CCW", stacklevel=2)
            cleaned.reverse()
        shp = sgeom.Polygon(cleaned)
        if not shp.is_valid:
            raise InvalidGeometry("ring is self-intersecting")
        self.vertices = tuple(cleaned)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @cached_property
    def shapely(self) -> sgeom.Polygon:
        return sgeom.Polygon(self.vertices)

    @cached_property
    def area(self) -> float:
        return _signed_area(list(self.vertices))

    @cached_property
    def centroid(self) -> tuple[float, float]:
        c = self.shapely.centroid
        return (c.x, c.y)

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    def __repr__(self) -> str:
        return f"Polygon({len(self.vertices)} vertices, area={self.area:.3f})"

    def transformed(self, fn) -> "Polygon":
        """New polygon with ``fn((x, y)) -> (x, y)`` applied to every vertex."""
        return Polygon([fn(p) for p in self.vertices])


@dataclass(frozen=True)
class CanonicalFrame:
    """Similarity-up-to-anisotropy transform putting a block's minimum rotated
    rectangle onto [-1, 1] x [-1, 1], long axis along +x."""

    rotation: float
    translation: tuple[float, float]
    width_W: float
    height_H: float

    def __post_init__(self):
        if not (self.width_W >= self.height_H > 0):
            raise InvalidGeometry(
                f"frame requires W >= H > 0, got W={self.width_W}, H={self.height_H}"
            )


def _dist2(a, b) -> float:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


def _signed_area(pts: list[tuple[float, float]]) -> float:
    acc = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def polygon_area(p: Polygon) -> float:
    """Shoelace area in square meters (positive for valid polygons)."""
    return p.area


def intersection_area(p: Polygon, q: Polygon) -> float:
    """Exact clipped intersection area of two polygons."""
    inter = p.shapely.intersection(q.shapely)
    return float(inter.area)


def polygon_iou(p: Polygon, q: Polygon) -> float:
    """Intersection-over-union in [0, 1]."""
    inter = intersection_area(p, q)
    union = p.area + q.area - inter
    if union <= 0:
        raise InvalidGeometry("IoU of degenerate polygons")
    return min(1.0, max(0.0, inter / union))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull by monotone chain, CCW, no repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        raise InvalidGeometry("hull needs >= 3 distinct points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                v = p - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise InvalidGeometry("collinear points have no rotated rectangle")
    return hull


def min_rotated_rect(p: Polygon) -> tuple[tuple[float, float], float, float, float]:
    """Minimum-area rotated bounding rectangle of a polygon.

    Returns ``(center, angle, extent_long, extent_short)`` with the angle of
    the long axis in [0, pi). Rotating calipers over the convex hull; area
    ties are broken by the smallest long-axis angle mod pi/2.
    """
    hull = convex_hull(p.array)
    edges = np.roll(hull, -1, axis=0) - hull
    thetas = np.arctan2(edges[:, 1], edges[:, 0])

    best = None  # (area, tie_key, theta_long, bbox)
    for theta in thetas:
        c, s = math.cos(-theta), math.sin(-theta)
        rot = hull @ np.array([[c, -s], [s, c]]).T
        xmin, ymin = rot.min(axis=0)
        xmax, ymax = rot.max(axis=0)
        ex, ey = xmax - xmin, ymax - ymin
        area = ex * ey
        theta_long = theta if ex >= ey else theta + math.pi / 2
        theta_long %= math.pi
        tie = round(theta_long % (math.pi / 2), 12)
        cand = (area, tie, theta_long, (xmin, xmax, ymin, ymax, theta))
        if best is None or area < best[0] * (1 - 1e-12):
            best = cand
        elif area <= best[0] * (1 + 1e-12) and tie < best[1]:
            best = cand
    assert best is not None
    _, _, theta_long, (xmin, xmax, ymin, ymax, theta) = best
    cx, cy = (xmin + xmax) / 2, (ymin + ymax) / 2
    c, s = math.cos(theta), math.sin(theta)
    center = (cx * c - cy * s, cx * s + cy * c)
    ex, ey = xmax - xmin, ymax - ymin
    long_e, short_e = (ex, ey) if ex >= ey else (ey, ex)
    return center, theta_long, float(long_e), float(short_e)


def canonical_frame(block: Polygon) -> CanonicalFrame:
    """Frame mapping the block's minimum rotated rectangle onto [-1, 1]^2."""
    center, angle, long_e, short_e = min_rotated_rect(block)
    return CanonicalFrame(rotation=angle, translation=center, width_W=long_e, height_H=short_e)


def to_canonical(pt: Sequence[float], f: CanonicalFrame) -> tuple[float, float]:
    """World meters -> canonical [-1, 1]-scaled coordinates."""
    dx = pt[0] - f.translation[0]
    dy = pt[1] - f.translation[1]
    c, s = math.cos(-f.rotation), math.sin(-f.rotation)
    rx = dx * c - dy * s
    ry = dx * s + dy * c
    return (2.0 * rx / f.width_W, 2.0 * ry / f.height_H)


def from_canonical(pt: Sequence[float], f: CanonicalFrame) -> tuple[float, float]:
    """Inverse of :func:`to_canonical`."""
    rx = pt[0] * f.width_W / 2.0
    ry = pt[1] * f.height_H / 2.0
    c, s = math.cos(f.rotation), math.sin(f.rotation)
    return (rx * c - ry * s + f.translation[0], rx * s + ry * c + f.translation[1])


def to_canonical_many(pts: np.ndarray, f: CanonicalFrame) -> np.ndarray:
    """Vectorized :func:`to_canonical` over an (n, 2) array."""
    d = np.asarray(pts, dtype=float) - np.array(f.translation)
    c, s = math.cos(-f.rotation), math.sin(-f.rotation)
    out = d @ np.array([[c, s], [-s, c]])
    out[:, 0] *= 2.0 / f.width_W
    out[:, 1] *= 2.0 / f.height_H
    return out


def from_canonical_many(pts: np.ndarray, f: CanonicalFrame) -> np.ndarray:
    p = np.asarray(pts, dtype=float).copy()
    p[:, 0] *= f.width_W / 2.0
    p[:, 1] *= f.height_H / 2.0
    c, s = math.cos(f.rotation), math.sin(f.rotation)
    return p @ np.array([[c, s], [-s, c]]) + np.array(f.translation)


def shapely_to_polygon(geom) -> Polygon:
    """Largest exterior ring of a shapely (Multi)Polygon as a :class:`Polygon`."""
    if geom.is_empty:
        raise InvalidGeometry("empty geometry")
    if geom.geom_type == "MultiPolygon":
        geom = max(geom.geoms, key=lambda g: g.area)
    if geom.geom_type != "Polygon":
        raise InvalidGeometry(f"expected polygonal geometry, got {geom.geom_type}")
    ring = list(geom.exterior.coords)
    if _signed_area(ring[:-1]) < 0:  # GEOS often emits CW exteriors
        ring = ring[::-1]
    return Polygon(ring)
