"""Layout evaluation: overlap ratio, out-of-block ratio, layout similarity,
and 1-Wasserstein distances over bounding-box descriptors and counts.

All scores are computed in each block's canonical frame, so they are
invariant under rigid motion of block and buildings together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import AlignmentError, EmptyDistribution
from .geometry import CanonicalFrame, Polygon, canonical_frame, min_rotated_rect, to_canonical_many

__all__ = [
    "LayoutSample",
    "MetricsReport",
    "overlap_ratio",
    "out_of_block_ratio",
    "wd_1d",
    "wd_count",
    "wd_bbx",
    "layout_similarity",
    "evaluate",
]


@dataclass(frozen=True)
class LayoutSample:
    block: Polygon
    buildings: tuple[tuple[Polygon, float], ...]

    @staticmethod
    def of(block: Polygon, buildings: Sequence[tuple[Polygon, float]]) -> "LayoutSample":
        return LayoutSample(block, tuple((p, float(h)) for p, h in buildings))


@dataclass(frozen=True)
class MetricsReport:
    l_sim: float
    opr: float
    obr: float
    wd_bbx: float
    wd_count: float
    n_gen_blocks: int
    n_ref_blocks: int

    def to_dict(self) -> dict:
        return {
            "l_sim": self.l_sim,
            "opr": self.opr,
            "obr": self.obr,
            "wd_bbx": self.wd_bbx,
            "wd_count": self.wd_count,
            "n_gen_blocks": self.n_gen_blocks,
            "n_ref_blocks": self.n_ref_blocks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def overlap_ratio(s: LayoutSample) -> float:
    """Sum of pairwise building intersection areas over the sum of building
    areas; 0 for empty layouts."""
    n = len(s.buildings)
    if n == 0:
        return 0.0
    shps = [p.shapely for p, _h in s.buildings]
    total_area = sum(g.area for g in shps)
    if total_area <= 0:
        return 0.0
    overlap = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if shps[i].intersects(shps[j]):
                overlap += shps[i].intersection(shps[j]).area
    return overlap / total_area


def out_of_block_ratio(s: LayoutSample, eps: float = 0.01) -> float:
    """Fraction of buildings whose area outside the block exceeds ``eps`` of
    their own area."""
    n = len(s.buildings)
    if n == 0:
        return 0.0
    blk = s.block.shapely
    out = 0
    for p, _h in s.buildings:
        outside = p.shapely.difference(blk).area
        if outside > eps * p.area:
            out += 1
    return out / n


def wd_1d(xs: Sequence[float], ys: Sequence[float]) -> float:
    """1-Wasserstein distance between two empirical distributions, exact via
    integrating |F_x - F_y| over the merged support."""
    xs = np.sort(np.asarray(xs, dtype=float))
    ys = np.sort(np.asarray(ys, dtype=float))
    if xs.size == 0 or ys.size == 0:
        raise EmptyDistribution("wd_1d needs non-empty samples on both sides")
    allv = np.concatenate([xs, ys])
    allv.sort(kind="mergesort")
    deltas = np.diff(allv)
    cdf_x = np.searchsorted(xs, allv[:-1], side="right") / xs.size
    cdf_y = np.searchsorted(ys, allv[:-1], side="right") / ys.size
    return float(np.sum(np.abs(cdf_x - cdf_y) * deltas))


def _counts(samples: Sequence[LayoutSample]) -> list[int]:
    return [len(s.buildings) for s in samples]


def wd_count(gen: Sequence[LayoutSample], ref: Sequence[LayoutSample]) -> float:
    """Wasserstein distance between per-block building-count distributions."""
    if not gen or not ref:
        raise EmptyDistribution("wd_count needs non-empty layout lists")
    return wd_1d(_counts(gen), _counts(ref))


def _descriptors(samples: Sequence[LayoutSample]) -> np.ndarray:
    """(n_buildings, 4) canonical descriptors: center x, center y, extent along
    the long block axis / W, extent along the short axis / H."""
    rows = []
    for s in samples:
        frame = canonical_frame(s.block)
        for p, _h in s.buildings:
            cx, cy = _canonical_centroid(p, frame)
            ext_x, ext_y = _snapped_extents(p, frame)
            rows.append(
                (
                    (cx + 1) / 2,
                    (cy + 1) / 2,
                    ext_x / frame.width_W,
                    ext_y / frame.height_H,
                )
            )
    return np.asarray(rows, dtype=float).reshape(-1, 4)


def _canonical_centroid(p: Polygon, frame: CanonicalFrame) -> tuple[float, float]:
    c = to_canonical_many(np.asarray([p.centroid]), frame)[0]
    return float(c[0]), float(c[1])


def _snapped_extents(p: Polygon, frame: CanonicalFrame) -> tuple[float, float]:
    _c, angle, long_e, short_e = min_rotated_rect(p)
    rel = (angle - frame.rotation) % math.pi
    if min(rel, math.pi - rel) <= math.pi / 4:
        return long_e, short_e
    return short_e, long_e


def wd_bbx(gen: Sequence[LayoutSample], ref: Sequence[LayoutSample]) -> float:
    """Mean over the 4 descriptor dimensions of the per-dimension 1-Wasserstein
    distance, buildings pooled across blocks."""
    dg = _descriptors(gen)
    dr = _descriptors(ref)
    if dg.shape[0] == 0 or dr.shape[0] == 0:
        raise EmptyDistribution("wd_bbx needs at least one building on each side")
    return float(np.mean([wd_1d(dg[:, k], dr[:, k]) for k in range(4)]))


def _canonical_bbox(p: Polygon, frame: CanonicalFrame) -> tuple[float, float, float, float]:
    can = to_canonical_many(p.array, frame)
    return (can[:, 0].min(), can[:, 1].min(), can[:, 0].max(), can[:, 1].max())


def _bbox_iou(a, b) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    ua = (a[2] - a[0]) * (a[3] - a[1])
    ub = (b[2] - b[0]) * (b[3] - b[1])
    union = ua + ub - inter
    return inter / union if union > 0 else 0.0


def layout_similarity(a: LayoutSample, b: LayoutSample) -> float:
    """Optimal centroid-distance assignment between the two building sets;
    score is the mean matched axis-aligned-bbox IoU in the canonical frame,
    with unmatched buildings contributing 0. Two empty layouts score 1."""
    na, nb = len(a.buildings), len(b.buildings)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    fa, fb = canonical_frame(a.block), canonical_frame(b.block)
    ca = np.array([_canonical_centroid(p, fa) for p, _h in a.buildings])
    cb = np.array([_canonical_centroid(p, fb) for p, _h in b.buildings])
    cost = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=-1)
    ri, ci = linear_sum_assignment(cost)
    boxes_a = [_canonical_bbox(p, fa) for p, _h in a.buildings]
    boxes_b = [_canonical_bbox(p, fb) for p, _h in b.buildings]
    score = sum(_bbox_iou(boxes_a[i], boxes_b[j]) for i, j in zip(ri, ci))
    return score / max(na, nb)


def evaluate(gen: Sequence[LayoutSample], ref: Sequence[LayoutSample]) -> MetricsReport:
    """Aggregate report over aligned generated/reference block lists."""
    if len(gen) != len(ref):
        raise AlignmentError(f"{len(gen)} generated vs {len(ref)} reference blocks")
    if not gen:
        raise EmptyDistribution("evaluate needs at least one block pair")
    l_sim = float(np.mean([layout_similarity(g, r) for g, r in zip(gen, ref)]))
    opr = float(np.mean([overlap_ratio(g) for g in gen]))
    obr = float(np.mean([out_of_block_ratio(g) for g in gen]))
    return MetricsReport(
        l_sim=l_sim,
        opr=opr,
        obr=obr,
        wd_bbx=wd_bbx(gen, ref),
        wd_count=wd_count(gen, ref),
        n_gen_blocks=len(gen),
        n_ref_blocks=len(ref),
    )
