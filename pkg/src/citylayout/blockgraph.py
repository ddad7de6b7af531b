"""Canonical grid-graph construction and its inverse.

A block's buildings are organized into a fixed R x C slot grid: rows are
clusters of canonical-y centroids ordered top to bottom, columns are ordered
by canonical x and left-packed. Node features and row/column edge weights
feed the generative model; :func:`degraph` maps predicted node fields back to
world-space footprints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from .config import (
    CLIP_INSET_M,
    GRID_COLS,
    GRID_ROWS,
    HEIGHT_CAP_M,
    MIN_BUILDING_AREA_M2,
    ROW_TAU_MIN,
)
from .errors import BlockTooDense, NonPositiveHeight
from .geometry import (
    CanonicalFrame,
    Polygon,
    canonical_frame,
    from_canonical,
    min_rotated_rect,
    shapely_to_polygon,
    to_canonical,
    to_canonical_many,
)
from .shapelib import DEFAULT_PARAMS, ShapeClass, fit_shape, template_polygon

log = logging.getLogger(__name__)

NODE_FEATURES = 15  # e, x, y, l, w, h, one-hot shape (8), a


class EdgeKind(IntEnum):
    ROW_GAP = 0  # connects vertically adjacent slots (r, c) - (r+1, c)
    COL_GAP = 1  # connects horizontally adjacent slots (r, c) - (r, c+1)


@dataclass(frozen=True)
class BuildingNode:
    e: int = 0
    x: float = 0.0
    y: float = 0.0
    l: float = 0.0
    w: float = 0.0
    h: float = 0.0
    s: ShapeClass = ShapeClass.RECT
    a: float = 0.0
    shape_params: Optional[tuple[float, ...]] = None  # aux, not a model feature


@dataclass(frozen=True)
class GridEdge:
    from_slot: int
    to_slot: int
    kind: EdgeKind
    weight: float = 0.0


@dataclass
class LayoutGraph:
    rows: int
    cols: int
    nodes: list[BuildingNode]
    edges: list[GridEdge]
    frame: CanonicalFrame
    block_id: str = ""

    @property
    def n_slots(self) -> int:
        return self.rows * self.cols

    def occupancy(self) -> np.ndarray:
        return np.array([n.e >= 0.5 for n in self.nodes], dtype=bool)

    def node_features(self) -> np.ndarray:
        """(n_slots, 15) array: [e, x, y, l, w, h, one-hot s, a]."""
        out = np.zeros((self.n_slots, NODE_FEATURES))
        for i, n in enumerate(self.nodes):
            out[i, 0] = n.e
            out[i, 1:6] = (n.x, n.y, n.l, n.w, n.h)
            out[i, 6 + int(n.s)] = 1.0
            out[i, 14] = n.a
        return out

    def edge_weight_matrix(self) -> np.ndarray:
        """Symmetric (n_slots, n_slots) weights over the 4-neighborhood."""
        m = np.zeros((self.n_slots, self.n_slots))
        for e in self.edges:
            m[e.from_slot, e.to_slot] = e.weight
            m[e.to_slot, e.from_slot] = e.weight
        return m

    def edge_weight_vector(self) -> np.ndarray:
        """Weights in the fixed :func:`grid_edge_list` order."""
        lut = {(e.from_slot, e.to_slot): e.weight for e in self.edges}
        return np.array([lut[(a, b)] for a, b, _ in grid_edge_list(self.rows, self.cols)])


def slot_index(row: int, col: int, cols: int) -> int:
    return row * cols + col


def grid_edge_list(rows: int, cols: int) -> list[tuple[int, int, EdgeKind]]:
    """Canonical ordering of all slot-adjacency edges: COL_GAP first, row-major."""
    out: list[tuple[int, int, EdgeKind]] = []
    for r in range(rows):
        for c in range(cols - 1):
            out.append((slot_index(r, c, cols), slot_index(r, c + 1, cols), EdgeKind.COL_GAP))
    for r in range(rows - 1):
        for c in range(cols):
            out.append((slot_index(r, c, cols), slot_index(r + 1, c, cols), EdgeKind.ROW_GAP))
    return out


def _canonical_centroids(buildings: Sequence[tuple[Polygon, float]], frame: CanonicalFrame):
    return np.array([to_canonical(b[0].centroid, frame) for b in buildings])


def assign_grid(
    buildings: Sequence[tuple[Polygon, float]],
    frame: CanonicalFrame,
    rows: int = GRID_ROWS,
    cols: int = GRID_COLS,
) -> list[tuple[int, int]]:
    """Slot (row, col) per building.

    Rows cluster canonical-y centroids top to bottom, splitting where the gap
    between consecutive sorted values exceeds tau = max(0.05, median canonical
    short extent). Columns order by canonical x, left-packed.
    """
    if len(buildings) > rows * cols:
        raise BlockTooDense(f"{len(buildings)} buildings exceed the {rows}x{cols} grid")
    if not buildings:
        return []
    cents = _canonical_centroids(buildings, frame)

    extents = []
    for poly, _h in buildings:
        can = to_canonical_many(poly.array, frame)
        span = can.max(axis=0) - can.min(axis=0)
        extents.append(min(span[0], span[1]))
    tau = max(ROW_TAU_MIN, float(np.median(extents)))

    order = np.argsort(-cents[:, 1], kind="stable")
    row_of = np.zeros(len(buildings), dtype=int)
    current = 0
    for k, idx in enumerate(order):
        if k > 0:
            prev = order[k - 1]
            if cents[prev, 1] - cents[idx, 1] > tau:
                current += 1
        row_of[idx] = current
    n_rows = current + 1
    if n_rows > rows:
        raise BlockTooDense(f"{n_rows} rows exceed the {rows}-row grid")

    assignment: list[tuple[int, int]] = [(0, 0)] * len(buildings)
    for r in range(n_rows):
        members = [i for i in range(len(buildings)) if row_of[i] == r]
        members.sort(key=lambda i: cents[i, 0])
        if len(members) > cols:
            raise BlockTooDense(f"row {r} holds {len(members)} buildings, grid allows {cols}")
        for c, i in enumerate(members):
            assignment[i] = (r, c)
    return assignment


def compute_edge_weights(
    centroids_canonical: np.ndarray,
    assignment: Sequence[tuple[int, int]],
    frame: CanonicalFrame,
    rows: int = GRID_ROWS,
    cols: int = GRID_COLS,
    literal_axes: bool = False,
) -> dict[tuple[int, int], float]:
    """Weights for grid edges between occupied slots.

    ROW_GAP between adjacent rows is the mean canonical centroid separation of
    the two rows; COL_GAP is the per-pair column gap. Each spacing is divided
    by the block extent along its own measurement axis; ``literal_axes``
    divides row spacing by W and column spacing by H instead.
    """
    occupied: dict[tuple[int, int], int] = {rc: i for i, rc in enumerate(assignment)}
    weights: dict[tuple[int, int], float] = {}
    if not assignment:
        return weights
    n_rows = max(r for r, _ in assignment) + 1

    # canonical coordinates span 2.0 across each block extent
    row_mean_y = {}
    for r in range(n_rows):
        ys = [centroids_canonical[i][1] for (rr, _c), i in occupied.items() if rr == r]
        row_mean_y[r] = float(np.mean(ys))

    aspect = frame.height_H / frame.width_W
    for (r, c), i in occupied.items():
        up = occupied.get((r - 1, c))
        if up is not None:
            sep = abs(row_mean_y[r - 1] - row_mean_y[r]) / 2.0
            if literal_axes:
                sep *= aspect  # meters / W instead of meters / H
            a = slot_index(r - 1, c, cols)
            b = slot_index(r, c, cols)
            weights[(a, b)] = min(1.0, sep)
        left = occupied.get((r, c - 1))
        if left is not None:
            gap = abs(centroids_canonical[i][0] - centroids_canonical[left][0]) / 2.0
            if literal_axes:
                gap /= aspect  # meters / H instead of meters / W
            a = slot_index(r, c - 1, cols)
            b = slot_index(r, c, cols)
            weights[(a, b)] = min(1.0, gap)
    return weights


def build_layout_graph(
    block: Polygon,
    buildings: Sequence[tuple[Polygon, float]],
    height_cap: float = HEIGHT_CAP_M,
    rows: int = GRID_ROWS,
    cols: int = GRID_COLS,
    block_id: str = "",
    literal_edge_axes: bool = False,
) -> LayoutGraph:
    """Canonical LayoutGraph for one block."""
    for _poly, h in buildings:
        if not h > 0:
            raise NonPositiveHeight(f"building height must be > 0, got {h}")
    frame = canonical_frame(block)
    assignment = assign_grid(buildings, frame, rows, cols)

    nodes = [BuildingNode() for _ in range(rows * cols)]
    if buildings:
        cents = _canonical_centroids(buildings, frame)
        for i, (poly, h) in enumerate(buildings):
            r, c = assignment[i]
            _center, angle, long_e, short_e = min_rotated_rect(poly)
            rel = (angle - frame.rotation) % math.pi
            if min(rel, math.pi - rel) <= math.pi / 4:
                ext_x, ext_y = long_e, short_e
            else:
                ext_x, ext_y = short_e, long_e
            s, a, params = fit_shape(poly)
            nodes[slot_index(r, c, cols)] = BuildingNode(
                e=1,
                x=float(np.clip((cents[i, 0] + 1) / 2, 0.0, 1.0)),
                y=float(np.clip((cents[i, 1] + 1) / 2, 0.0, 1.0)),
                l=float(np.clip(ext_x / frame.width_W, 1e-6, 1.0)),
                w=float(np.clip(ext_y / frame.height_H, 1e-6, 1.0)),
                h=float(np.clip(h / height_cap, 0.0, 1.0)),
                s=s,
                a=a,
                shape_params=params,
            )
        wmap = compute_edge_weights(cents, assignment, frame, rows, cols, literal_edge_axes)
    else:
        wmap = {}

    edges = [
        GridEdge(a, b, kind, wmap.get((a, b), 0.0)) for a, b, kind in grid_edge_list(rows, cols)
    ]
    return LayoutGraph(rows=rows, cols=cols, nodes=nodes, edges=edges, frame=frame, block_id=block_id)


def layout_graph_from_fields(
    e: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l: np.ndarray,
    w: np.ndarray,
    h: np.ndarray,
    s: np.ndarray,
    a: np.ndarray,
    frame: CanonicalFrame,
    rows: int = GRID_ROWS,
    cols: int = GRID_COLS,
    block_id: str = "",
    edge_weights: Optional[np.ndarray] = None,
) -> LayoutGraph:
    """LayoutGraph from per-slot predicted fields (model output side)."""
    nodes = []
    for i in range(rows * cols):
        if e[i] >= 0.5:
            nodes.append(
                BuildingNode(
                    e=1,
                    x=float(np.clip(x[i], 0, 1)),
                    y=float(np.clip(y[i], 0, 1)),
                    l=float(np.clip(l[i], 1e-6, 1)),
                    w=float(np.clip(w[i], 1e-6, 1)),
                    h=float(np.clip(h[i], 0, 1)),
                    s=ShapeClass(int(s[i])),
                    a=float(np.clip(a[i], 0, 1)),
                )
            )
        else:
            nodes.append(BuildingNode())
    elist = grid_edge_list(rows, cols)
    ew = edge_weights if edge_weights is not None else np.zeros(len(elist))
    edges = [GridEdge(a_, b_, k_, float(ew[j])) for j, (a_, b_, k_) in enumerate(elist)]
    return LayoutGraph(rows=rows, cols=cols, nodes=nodes, edges=edges, frame=frame, block_id=block_id)


@dataclass(frozen=True)
class DecodedBuilding:
    footprint: Polygon
    height: float
    shape: ShapeClass
    slot: int


def degraph(
    g: LayoutGraph,
    block: Polygon,
    height_cap: float = HEIGHT_CAP_M,
    clip_inset: float = CLIP_INSET_M,
    min_area: float = MIN_BUILDING_AREA_M2,
) -> list[DecodedBuilding]:
    """De-canonicalize occupied slots back to world-space buildings.

    Footprints are clipped to the block boundary inset by ``clip_inset``;
    remnants below ``min_area`` are dropped and logged.
    """
    frame = g.frame
    region = block.shapely.buffer(-clip_inset, join_style=2)
    out: list[DecodedBuilding] = []
    for i, n in enumerate(g.nodes):
        if n.e < 0.5:
            continue
        params = n.shape_params if n.shape_params is not None else DEFAULT_PARAMS[n.s]
        tpl = template_polygon(n.s, params)
        pts = tpl.array - 0.5
        pts[:, 0] *= n.l * frame.width_W
        pts[:, 1] *= n.w * frame.height_H
        ct, st = math.cos(frame.rotation), math.sin(frame.rotation)
        pts = pts @ np.array([[ct, st], [-st, ct]])
        cx, cy = from_canonical((2 * n.x - 1, 2 * n.y - 1), frame)
        pts += np.array([cx, cy])
        fp = Polygon(pts)
        if region.is_empty:
            log.info("slot %d dropped: clip region empty", i)
            continue
        if not fp.shapely.within(region):
            clipped = fp.shapely.intersection(region)
            if clipped.is_empty or clipped.area < min_area:
                log.info("slot %d dropped after clipping (area %.2f m2)", i, clipped.area)
                continue
            fp = shapely_to_polygon(clipped)
        if fp.area < min_area:
            log.info("slot %d dropped: footprint below %.1f m2", i, min_area)
            continue
        out.append(DecodedBuilding(fp, n.h * height_cap, n.s, i))
    return out
