"""Vector data ingestion: GeoJSON loading with validation, spatial joins,
land-use assignment, dataset assembly with filters, and corpus statistics.

Coordinates are assumed planar meters; inputs that look like lon/lat trigger
a warning. GeoJSON FeatureCollections are the only required input format.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Point
from shapely.strtree import STRtree

from .blockgraph import LayoutGraph, build_layout_graph
from .condition import block_scalars, rasterize_block
from .config import GRID_COLS, GRID_ROWS, HEIGHT_CAP_M, LANDUSE_CLASSES, RASTER_SIZE
from .errors import (
    BlockTooDense,
    EmptyDataset,
    IngestIOError,
    InvalidGeometry,
    NonPositiveHeight,
)
from .geometry import Polygon, canonical_frame

log = logging.getLogger(__name__)

__all__ = [
    "RawBuilding",
    "BlockRecord",
    "DatasetItem",
    "DatasetStats",
    "load_blocks",
    "load_buildings",
    "load_landuse",
    "spatial_join",
    "assign_landuse",
    "assemble_records",
    "build_dataset",
    "dataset_stats",
    "write_exclusion_log",
]


@dataclass(frozen=True)
class RawBuilding:
    footprint: Polygon
    height: float
    source_id: str = ""


@dataclass
class BlockRecord:
    id: str
    boundary: Polygon
    land_use: int = 0
    buildings: list[RawBuilding] = field(default_factory=list)
    source: str = ""


@dataclass
class DatasetItem:
    """Model-ready sample: layout graph plus raw condition inputs (the learned
    embedding is added after the block autoencoder is trained)."""

    record: BlockRecord
    graph: LayoutGraph
    raster: np.ndarray
    l_hat: float
    p_hat: float


@dataclass(frozen=True)
class SourceStats:
    max: int
    min: int
    avg: float
    std: float
    total_blocks: int


@dataclass(frozen=True)
class DatasetStats:
    sources: dict[str, SourceStats]
    landuse_counts: dict[int, int]
    total_blocks: int


def _read_feature_collection(path) -> list[dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestIOError(f"cannot read {path}: {exc}") from exc
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise IngestIOError(f"{path} is not a GeoJSON FeatureCollection")
    return doc["features"]


def _feature_polygon(feature: dict) -> Polygon:
    geom = feature.get("geometry") or {}
    if geom.get("type") != "Polygon":
        raise InvalidGeometry(f"unsupported geometry type {geom.get('type')}")
    rings = geom.get("coordinates") or []
    if not rings:
        raise InvalidGeometry("empty polygon coordinates")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # orientation fixes are routine on load
        return Polygon(rings[0])


def _warn_if_lonlat(polys: Sequence[Polygon], path) -> None:
    if not polys:
        return
    arr = np.concatenate([p.array for p in polys[:50]])
    if np.all(np.abs(arr[:, 0]) <= 180.0) and np.all(np.abs(arr[:, 1]) <= 90.0):
        warnings.warn(
            f"{path}: coordinates look like lon/lat; planar meters are expected"
        )


def load_blocks(path) -> tuple[list[tuple[str, Polygon]], int]:
    """Block boundaries with ids; returns (records, skipped_count)."""
    out: list[tuple[str, Polygon]] = []
    skipped = 0
    for i, feat in enumerate(_read_feature_collection(path)):
        props = feat.get("properties") or {}
        bid = props.get("id")
        try:
            poly = _feature_polygon(feat)
        except InvalidGeometry as exc:
            log.warning("block feature %d skipped: %s", i, exc)
            skipped += 1
            continue
        if bid is None:
            log.warning("block feature %d skipped: missing id", i)
            skipped += 1
            continue
        out.append((str(bid), poly))
    if not out:
        raise EmptyDataset(f"no valid block features in {path}")
    _warn_if_lonlat([p for _i, p in out], path)
    return out, skipped


def load_buildings(path) -> tuple[list[RawBuilding], int]:
    """Building footprints with heights; returns (records, skipped_count)."""
    out: list[RawBuilding] = []
    skipped = 0
    for i, feat in enumerate(_read_feature_collection(path)):
        props = feat.get("properties") or {}
        height = props.get("height")
        try:
            poly = _feature_polygon(feat)
        except InvalidGeometry as exc:
            log.warning("building feature %d skipped: %s", i, exc)
            skipped += 1
            continue
        if height is None or not float(height) > 0:
            log.warning("building feature %d skipped: missing/non-positive height", i)
            skipped += 1
            continue
        out.append(RawBuilding(poly, float(height), str(props.get("id", i))))
    if not out:
        raise EmptyDataset(f"no valid building features in {path}")
    _warn_if_lonlat([b.footprint for b in out], path)
    return out, skipped


def load_landuse(
    path, class_names: Sequence[str] = LANDUSE_CLASSES
) -> tuple[list[tuple[Polygon, int]], int]:
    """Land-use polygons with class indices; `class` may be a name or index."""
    lut = {name.lower(): k for k, name in enumerate(class_names)}
    out: list[tuple[Polygon, int]] = []
    skipped = 0
    for i, feat in enumerate(_read_feature_collection(path)):
        props = feat.get("properties") or {}
        cls = props.get("class")
        try:
            poly = _feature_polygon(feat)
        except InvalidGeometry as exc:
            log.warning("landuse feature %d skipped: %s", i, exc)
            skipped += 1
            continue
        if isinstance(cls, str):
            idx = lut.get(cls.lower())
        elif isinstance(cls, (int, float)):
            idx = int(cls) if 0 <= int(cls) < len(class_names) else None
        else:
            idx = None
        if idx is None:
            log.warning("landuse feature %d skipped: unknown class %r", i, cls)
            skipped += 1
            continue
        out.append((poly, idx))
    if not out:
        raise EmptyDataset(f"no valid land-use features in {path}")
    return out, skipped


def spatial_join(
    blocks: Sequence[tuple[str, Polygon]], buildings: Sequence[RawBuilding]
) -> tuple[dict[int, str], int]:
    """Assign each building to the block containing its centroid.

    Returns (building index -> block id, dropped_count). Boundary ties go to
    the lowest block index.
    """
    tree = STRtree([p.shapely for _i, p in blocks])
    assignment: dict[int, str] = {}
    dropped = 0
    for k, b in enumerate(buildings):
        pt = Point(b.footprint.centroid)
        hits = sorted(tree.query(pt, predicate="covered_by").tolist())
        if not hits:
            dropped += 1
            continue
        assignment[k] = blocks[hits[0]][0]
    return assignment, dropped


def assign_landuse(
    blocks: Sequence[tuple[str, Polygon]], landuse: Sequence[tuple[Polygon, int]]
) -> list[int]:
    """Class per block by largest overlap area; ties to the lower class index,
    no overlap defaults to class 0 with a warning."""
    classes = sorted({c for _p, c in landuse})
    tree = STRtree([p.shapely for p, _c in landuse])
    out = []
    for bid, poly in blocks:
        areas: dict[int, float] = {}
        for j in tree.query(poly.shapely, predicate="intersects").tolist():
            lp, cls = landuse[j]
            areas[cls] = areas.get(cls, 0.0) + poly.shapely.intersection(lp.shapely).area
        if not areas or max(areas.values()) <= 0:
            warnings.warn(f"block {bid}: no land-use overlap, defaulting to class 0")
            out.append(0)
            continue
        best = max(areas.values())
        out.append(min(c for c in classes if areas.get(c, 0.0) == best))
    return out


def assemble_records(
    blocks: Sequence[tuple[str, Polygon]],
    buildings: Sequence[RawBuilding],
    landuse: Optional[Sequence[tuple[Polygon, int]]] = None,
    source: str = "",
) -> list[BlockRecord]:
    """Join blocks, buildings and land use into BlockRecords (sorted by id)."""
    joined, dropped = spatial_join(blocks, buildings)
    if dropped:
        log.info("%d buildings dropped: centroid outside every block", dropped)
    classes = assign_landuse(blocks, landuse) if landuse else [0] * len(blocks)
    by_id: dict[str, BlockRecord] = {
        bid: BlockRecord(id=bid, boundary=poly, land_use=classes[i], source=source)
        for i, (bid, poly) in enumerate(blocks)
    }
    for k, bid in joined.items():
        by_id[bid].buildings.append(buildings[k])
    return [by_id[k] for k in sorted(by_id)]


def build_dataset(
    records: Sequence[BlockRecord],
    n_classes: int = len(LANDUSE_CLASSES),
    rows: int = GRID_ROWS,
    cols: int = GRID_COLS,
    height_cap: float = HEIGHT_CAP_M,
    raster_size: int = RASTER_SIZE,
) -> tuple[list[DatasetItem], list[tuple[str, str]]]:
    """Model-ready dataset plus the exclusion log [(block_id, reason)]."""
    items: list[DatasetItem] = []
    exclusions: list[tuple[str, str]] = []
    for rec in records:
        if not rec.buildings:
            exclusions.append((rec.id, "no_buildings"))
            continue
        try:
            graph = build_layout_graph(
                rec.boundary,
                [(b.footprint, b.height) for b in rec.buildings],
                height_cap=height_cap,
                rows=rows,
                cols=cols,
                block_id=rec.id,
            )
            frame = canonical_frame(rec.boundary)
            l_hat, p_hat = block_scalars(frame)
            raster = rasterize_block(
                rec.boundary, l_hat, p_hat, rec.land_use, n_classes, raster_size
            )
        except BlockTooDense:
            exclusions.append((rec.id, "too_dense"))
            continue
        except NonPositiveHeight:
            exclusions.append((rec.id, "non_positive_height"))
            continue
        except InvalidGeometry:
            exclusions.append((rec.id, "invalid_geometry"))
            continue
        items.append(DatasetItem(rec, graph, raster, l_hat, p_hat))
    if not items:
        raise EmptyDataset("no blocks survived dataset filters")
    return items, exclusions


def write_exclusion_log(exclusions: Sequence[tuple[str, str]], path) -> None:
    Path(path).write_text("".join(f"{bid}\t{reason}\n" for bid, reason in exclusions))


def save_corpus(records: Sequence[BlockRecord], directory) -> None:
    """Write a joined corpus as blocks.geojson + buildings.geojson (buildings
    carry their block_id so loading needs no spatial re-join)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def ring(p: Polygon):
        r = [[round(x, 9), round(y, 9)] for x, y in p.vertices]
        r.append(r[0])
        return [r]

    blocks = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": ring(rec.boundary)},
                "properties": {"id": rec.id, "land_use": rec.land_use, "source": rec.source},
            }
            for rec in sorted(records, key=lambda r: r.id)
        ],
    }
    buildings = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": ring(b.footprint)},
                "properties": {"id": b.source_id, "height": b.height, "block_id": rec.id},
            }
            for rec in sorted(records, key=lambda r: r.id)
            for b in rec.buildings
        ],
    }
    (directory / "blocks.geojson").write_text(json.dumps(blocks, sort_keys=True))
    (directory / "buildings.geojson").write_text(json.dumps(buildings, sort_keys=True))


def load_corpus(directory) -> list[BlockRecord]:
    """Inverse of :func:`save_corpus`."""
    directory = Path(directory)
    blocks, _sk = load_blocks(directory / "blocks.geojson")
    with open(directory / "blocks.geojson") as fh:
        props = {
            (f.get("properties") or {}).get("id"): (f.get("properties") or {})
            for f in json.load(fh)["features"]
        }
    records = {
        bid: BlockRecord(
            id=bid,
            boundary=poly,
            land_use=int(props.get(bid, {}).get("land_use", 0)),
            source=str(props.get(bid, {}).get("source", "")),
        )
        for bid, poly in blocks
    }
    features = _read_feature_collection(directory / "buildings.geojson")
    for i, feat in enumerate(features):
        p = feat.get("properties") or {}
        if p.get("height") is None or p.get("block_id") not in records:
            log.warning("corpus building %d skipped", i)
            continue
        poly = _feature_polygon(feat)
        records[p["block_id"]].buildings.append(
            RawBuilding(poly, float(p["height"]), str(p.get("id", i)))
        )
    return [records[k] for k in sorted(records)]


def dataset_stats(records: Sequence[BlockRecord]) -> DatasetStats:
    """Buildings-per-block statistics per source plus land-use block counts."""
    if not records:
        raise EmptyDataset("no records to summarize")
    by_source: dict[str, list[int]] = {}
    landuse_counts: dict[int, int] = {}
    for rec in records:
        by_source.setdefault(rec.source, []).append(len(rec.buildings))
        landuse_counts[rec.land_use] = landuse_counts.get(rec.land_use, 0) + 1
    sources = {
        src: SourceStats(
            max=int(np.max(counts)),
            min=int(np.min(counts)),
            avg=float(np.mean(counts)),
            std=float(np.std(counts)),
            total_blocks=len(counts),
        )
        for src, counts in sorted(by_source.items())
    }
    return DatasetStats(sources=sources, landuse_counts=dict(sorted(landuse_counts.items())), total_blocks=len(records))
