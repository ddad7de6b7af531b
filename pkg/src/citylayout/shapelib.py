"""Eight-template parametric building shape library and footprint fitting.

Templates live in the unit box [0, 1]^2, touch all four sides, and are simple
polygons. Fitting normalizes a footprint into its own minimum-rotated-rectangle
unit box and searches template class, parameters (9-step grid per dimension
plus local refinement), and box symmetries for the best IoU.
"""

from __future__ import annotations

import itertools
import math
from enum import IntEnum
from typing import Sequence

import numpy as np
import shapely.geometry as sgeom
from scipy.optimize import minimize
from shapely.geometry import box as _box

from .config import COURTYARD_SLIT
from .errors import InvalidGeometry, InvalidParams
from .geometry import CanonicalFrame, Polygon, min_rotated_rect, to_canonical_many

__all__ = ["ShapeClass", "PARAM_COUNTS", "DEFAULT_PARAMS", "template_polygon", "fit_shape"]


class ShapeClass(IntEnum):
    RECT = 0
    U = 1
    L = 2
    H = 3
    T = 4
    X = 5
    COURTYARD = 6
    TRIANGLE = 7


PARAM_COUNTS = {
    ShapeClass.RECT: 0,
    ShapeClass.U: 2,
    ShapeClass.L: 2,
    ShapeClass.H: 2,
    ShapeClass.T: 2,
    ShapeClass.X: 2,
    ShapeClass.COURTYARD: 2,
    ShapeClass.TRIANGLE: 1,
}

# Used by the decoder when no fitted parameters are available.
DEFAULT_PARAMS = {c: (0.5,) * n for c, n in PARAM_COUNTS.items()}


def _check_params(cls: ShapeClass, params: Sequence[float]) -> tuple[float, ...]:
    p = tuple(float(v) for v in params)
    if len(p) != PARAM_COUNTS[cls]:
        raise InvalidParams(f"{cls.name} takes {PARAM_COUNTS[cls]} params, got {len(p)}")
    if any(not (0.0 < v < 1.0) for v in p):
        raise InvalidParams(f"{cls.name} params must lie in open (0, 1): {p}")
    return p


def _template_shapely(cls: ShapeClass, params: tuple[float, ...]) -> sgeom.Polygon:
    unit = _box(0.0, 0.0, 1.0, 1.0)
    if cls == ShapeClass.RECT:
        return unit
    if cls == ShapeClass.L:
        a, b = params
        return unit.difference(_box(a, b, 1.0, 1.0))
    if cls == ShapeClass.U:
        nw, nd = params
        return unit.difference(_box(0.5 - nw / 2, 1.0 - nd, 0.5 + nw / 2, 1.0))
    if cls == ShapeClass.T:
        sw, fh = params
        out = unit.difference(_box(0.0, 0.0, 0.5 - sw / 2, 1.0 - fh))
        return out.difference(_box(0.5 + sw / 2, 0.0, 1.0, 1.0 - fh))
    if cls == ShapeClass.H:
        q, ch = params
        lw = q / 2.0  # keeps the two legs strictly apart
        yb, yt = 0.5 - ch / 2, 0.5 + ch / 2
        out = unit.difference(_box(lw, yt, 1.0 - lw, 1.0))
        return out.difference(_box(lw, 0.0, 1.0 - lw, yb))
    if cls == ShapeClass.X:
        w1 = params[0] * math.sqrt(2.0) / 4.0
        w2 = params[1] * math.sqrt(2.0) / 4.0
        n1 = (-w1 / math.sqrt(2.0), w1 / math.sqrt(2.0))
        bar1 = sgeom.Polygon(
            [
                (0 + n1[0], 0 + n1[1]),
                (0 - n1[0], 0 - n1[1]),
                (1 - n1[0], 1 - n1[1]),
                (1 + n1[0], 1 + n1[1]),
            ]
        )
        n2 = (w2 / math.sqrt(2.0), w2 / math.sqrt(2.0))
        bar2 = sgeom.Polygon(
            [
                (1 + n2[0], 0 + n2[1]),
                (1 - n2[0], 0 - n2[1]),
                (0 - n2[0], 1 - n2[1]),
                (0 + n2[0], 1 + n2[1]),
            ]
        )
        return bar1.union(bar2).intersection(unit)
    if cls == ShapeClass.COURTYARD:
        rx, ry = params
        hole = _box(0.5 - rx / 2, 0.5 - ry / 2, 0.5 + rx / 2, 0.5 + ry / 2)
        # keyhole slit keeps the ring a simple polygon (no interior ring)
        slit_top = 0.5 - ry / 2 + min(ry / 4, 0.01)
        slit = _box(0.5 - COURTYARD_SLIT / 2, 0.0, 0.5 + COURTYARD_SLIT / 2, slit_top)
        return unit.difference(hole).difference(slit)
    if cls == ShapeClass.TRIANGLE:
        (t,) = params
        return sgeom.Polygon([(0.0, 0.0), (1.0, 0.0), (t, 1.0)])
    raise InvalidParams(f"unknown shape class {cls}")


def template_polygon(cls: ShapeClass, params: Sequence[float] = ()) -> Polygon:
    """Template footprint for a shape class, in the unit box."""
    p = _check_params(cls, params)
    shp = _template_shapely(cls, p)
    if shp.geom_type != "Polygon" or shp.interiors:
        raise InvalidParams(f"{cls.name}{p} degenerates to a non-simple template")
    ring = list(shp.exterior.coords)
    poly = Polygon(ring if _ccw(ring) else ring[::-1])
    return poly


def _ccw(ring) -> bool:
    acc = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        acc += x0 * y1 - x1 * y0
    return acc > 0


# ---------------------------------------------------------------------------
# Fitting

_GRID_STEPS = tuple(round(0.1 * i, 10) for i in range(1, 10))

# Unit-box symmetries: 0..3 rotations by 90k deg, 4..7 the mirrored ones.
_POSE_MATS = []
for _k in range(4):
    c, s = math.cos(math.pi / 2 * _k), math.sin(math.pi / 2 * _k)
    _POSE_MATS.append(np.array([[c, -s], [s, c]]))
for _k in range(4):
    c, s = math.cos(math.pi / 2 * _k), math.sin(math.pi / 2 * _k)
    _POSE_MATS.append(np.array([[c, -s], [s, c]]) @ np.array([[-1.0, 0.0], [0.0, 1.0]]))

# Template symmetries + parameter swaps make most footprint poses redundant.
_POSES_PER_CLASS = {
    ShapeClass.RECT: (0,),
    ShapeClass.U: (0, 1, 2, 3),
    ShapeClass.L: (0, 1, 2, 3),
    ShapeClass.H: (0, 1),
    ShapeClass.T: (0, 1, 2, 3),
    ShapeClass.X: (0,),
    ShapeClass.COURTYARD: (0,),
    ShapeClass.TRIANGLE: (0, 1, 2, 3),
}

_template_cache: dict[tuple, tuple[sgeom.Polygon, float]] = {}


def _cached_template(cls: ShapeClass, params: tuple[float, ...]):
    key = (int(cls), params)
    hit = _template_cache.get(key)
    if hit is None:
        shp = _template_shapely(cls, params)
        hit = (shp, shp.area)
        _template_cache[key] = hit
    return hit


def _param_grid(cls: ShapeClass):
    n = PARAM_COUNTS[cls]
    if n == 0:
        return [()]
    return list(itertools.product(_GRID_STEPS, repeat=n))


def _posed_footprints(footprint: Polygon) -> list[tuple[sgeom.Polygon, float]]:
    center, angle, long_e, short_e = min_rotated_rect(footprint)
    frame = CanonicalFrame(angle, center, long_e, short_e)
    unit = (to_canonical_many(footprint.array, frame) + 1.0) / 2.0
    posed = []
    for mat in _POSE_MATS:
        pts = (unit - 0.5) @ mat.T + 0.5
        shp = sgeom.Polygon(pts)
        if not shp.is_valid:
            shp = shp.buffer(0)
        posed.append((shp, shp.area))
    return posed


def _iou(foot: sgeom.Polygon, foot_area: float, tpl: sgeom.Polygon, tpl_area: float) -> float:
    inter = foot.intersection(tpl).area
    union = foot_area + tpl_area - inter
    return inter / union if union > 0 else 0.0


def fit_shape(
    footprint: Polygon,
    refine: bool = True,
    early_exit: float = 0.999,
) -> tuple[ShapeClass, float, tuple[float, ...]]:
    """Best-fitting template class for a footprint.

    Returns ``(shape_class, a, params)`` where ``a`` is the IoU between the
    MRR-normalized footprint and the fitted template, in [0, 1]. Ties on ``a``
    go to the lower class code.
    """
    if footprint.area <= 0:
        raise InvalidGeometry("cannot fit a degenerate footprint")
    posed = _posed_footprints(footprint)

    best_per_class: dict[ShapeClass, tuple[float, tuple[float, ...], int]] = {}
    overall = 0.0
    for cls in ShapeClass:
        best = (0.0, DEFAULT_PARAMS[cls], 0)
        for params in _param_grid(cls):
            tpl, tpl_area = _cached_template(cls, params)
            for pose in _POSES_PER_CLASS[cls]:
                foot, foot_area = posed[pose]
                a = _iou(foot, foot_area, tpl, tpl_area)
                if a > best[0]:
                    best = (a, params, pose)
        best_per_class[cls] = best
        overall = max(overall, best[0])
        if overall >= early_exit:
            break

    if refine and overall < early_exit:
        ranked = sorted(best_per_class, key=lambda c: (-best_per_class[c][0], int(c)))
        for cls in ranked[:3]:
            a0, p0, pose = best_per_class[cls]
            if PARAM_COUNTS[cls] == 0:
                continue
            foot, foot_area = posed[pose]

            def neg_iou(x):
                params = tuple(float(np.clip(v, 1e-3, 1.0 - 1e-3)) for v in x)
                tpl = _template_shapely(cls, params)  # off-grid: skip the cache
                return -_iou(foot, foot_area, tpl, tpl.area)

            res = minimize(
                neg_iou,
                x0=np.asarray(p0),
                method="Nelder-Mead",
                options={"maxiter": 120, "xatol": 1e-4, "fatol": 1e-6},
            )
            a1 = -float(res.fun)
            if a1 > a0:
                refined = tuple(float(np.clip(v, 1e-3, 1.0 - 1e-3)) for v in res.x)
                best_per_class[cls] = (a1, refined, pose)

    winner = min(
        best_per_class,
        key=lambda c: (-round(best_per_class[c][0], 12), int(c)),
    )
    a, params, _pose = best_per_class[winner]
    return winner, min(1.0, a), params
