"""Vector 3D export (GeoJSON with per-building heights, OBJ extrusions) and
binary checkpoint persistence.

GeoJSON export is deterministic byte-for-byte: fixed precision, sorted keys,
compact separators. OBJ solids are watertight: ear-clipped caps plus two wall
triangles per footprint edge, consistently wound.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CorruptCheckpoint, IngestIOError, InvalidGeometry
from .geometry import Polygon
from .shapelib import ShapeClass

__all__ = [
    "GeneratedBuilding",
    "GeneratedLayout",
    "export_geojson",
    "load_layouts",
    "export_blocks_geojson",
    "export_obj",
    "triangulate",
    "save_checkpoint",
    "load_checkpoint",
]

COORD_PRECISION = 9


@dataclass(frozen=True)
class GeneratedBuilding:
    footprint: Polygon
    height: float
    shape: ShapeClass = ShapeClass.RECT
    land_use: int = 0

    def __post_init__(self):
        if not self.height > 0:
            raise InvalidGeometry(f"generated building height must be > 0, got {self.height}")


@dataclass(frozen=True)
class GeneratedLayout:
    block_id: str
    buildings: tuple[GeneratedBuilding, ...]


def _ring(poly: Polygon) -> list[list[float]]:
    ring = [[round(x, COORD_PRECISION), round(y, COORD_PRECISION)] for x, y in poly.vertices]
    ring.append(ring[0])
    return ring


def export_geojson(layouts: Sequence[GeneratedLayout]) -> str:
    """FeatureCollection with one feature per building, in block-id order."""
    features = []
    for layout in sorted(layouts, key=lambda L: L.block_id):
        for b in layout.buildings:
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [_ring(b.footprint)]},
                    "properties": {
                        "block_id": layout.block_id,
                        "height": round(b.height, COORD_PRECISION),
                        "shape": b.shape.name,
                        "land_use": b.land_use,
                    },
                }
            )
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_layouts(source: str | Path) -> list[GeneratedLayout]:
    """Inverse of :func:`export_geojson`; accepts a JSON string or a path."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise IngestIOError(f"cannot read {source}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestIOError(f"invalid GeoJSON: {exc}") from exc
    if doc.get("type") != "FeatureCollection":
        raise IngestIOError("expected a FeatureCollection")
    grouped: dict[str, list[GeneratedBuilding]] = {}
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise IngestIOError(f"unsupported geometry {geom.get('type')}")
        poly = Polygon(geom["coordinates"][0])
        shape = props.get("shape", "RECT")
        grouped.setdefault(str(props.get("block_id", "")), []).append(
            GeneratedBuilding(
                footprint=poly,
                height=float(props.get("height", 0)),
                shape=ShapeClass[shape] if isinstance(shape, str) else ShapeClass(int(shape)),
                land_use=int(props.get("land_use", 0)),
            )
        )
    return [GeneratedLayout(bid, tuple(blds)) for bid, blds in sorted(grouped.items())]


def export_blocks_geojson(blocks: Sequence[tuple[str, Polygon, int]]) -> str:
    """Block boundaries with land-use class, for the service and CLI."""
    features = [
        {
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [_ring(poly)]},
            "properties": {"id": bid, "land_use": land_use},
        }
        for bid, poly, land_use in sorted(blocks, key=lambda t: t[0])
    ]
    return json.dumps({"type": "FeatureCollection", "features": features}, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# OBJ extrusion


def triangulate(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a simple CCW polygon; returns n-2 index
    triples."""
    n = len(pts)
    if n < 3:
        raise InvalidGeometry("cannot triangulate fewer than 3 vertices")
    scale = float(np.abs(pts).max()) or 1.0
    eps = 1e-12 * scale * scale
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b) -> float:
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (
            pts[a, 1] - pts[o, 1]
        ) * (pts[b, 0] - pts[o, 0])

    def inside(p, a, b, c) -> bool:
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return d1 >= -eps and d2 >= -eps and d3 >= -eps

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 2 * n * n:
            raise InvalidGeometry("ear clipping failed to converge (degenerate ring?)")
        found = False
        m = len(idx)
        for k in range(m):
            a, b, c = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            if cross(a, b, c) <= eps:
                continue  # reflex or flat corner
            if any(inside(p, a, b, c) for p in idx if p not in (a, b, c)):
                continue
            tris.append((a, b, c))
            idx.pop(k)
            found = True
            break
        if not found:
            raise InvalidGeometry("no ear found; ring may be self-intersecting")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def export_obj(layouts: Sequence[GeneratedLayout]) -> str:
    """Wavefront OBJ: one watertight extruded solid per building."""
    lines = ["# citylayout 3D export"]
    base = 0
    for layout in sorted(layouts, key=lambda L: L.block_id):
        for k, b in enumerate(layout.buildings):
            pts = b.footprint.array
            n = len(pts)
            lines.append(f"o bldg_{layout.block_id}_{k}")
            for x, y in pts:
                lines.append(f"v {x:.6f} {y:.6f} 0.000000")
            for x, y in pts:
                lines.append(f"v {x:.6f} {y:.6f} {b.height:.6f}")
            caps = triangulate(pts)
            for i, j, kk in caps:  # bottom cap faces downward
                lines.append(f"f {base + i + 1} {base + kk + 1} {base + j + 1}")
            for i, j, kk in caps:  # top cap faces upward
                lines.append(f"f {base + n + i + 1} {base + n + j + 1} {base + n + kk + 1}")
            for i in range(n):  # walls face outward
                j = (i + 1) % n
                lines.append(f"f {base + i + 1} {base + j + 1} {base + n + j + 1}")
                lines.append(f"f {base + i + 1} {base + n + j + 1} {base + n + i + 1}")
            base += 2 * n
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Checkpoints

_MAGIC = b"CLCK"
_VERSION = 1


def save_checkpoint(path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    """Self-describing binary container: JSON header (hyperparameters plus a
    name/shape manifest) followed by little-endian float64 blocks."""
    manifest = [[name, list(np.asarray(tensors[name]).shape)] for name in sorted(tensors)]
    header = dict(meta)
    header["format_version"] = _VERSION
    header["tensors"] = manifest
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name, _shape in manifest:
            fh.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a checkpoint; every tensor is validated against the header."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IngestIOError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 16 or raw[:4] != _MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != _VERSION:
        raise CorruptCheckpoint(f"{path}: format version {version}, expected {_VERSION}")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + hlen:
        raise CorruptCheckpoint(f"{path}: truncated header")
    try:
        header = json.loads(raw[16 : 16 + hlen])
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header: {exc}") from exc
    offset = 16 + hlen
    tensors: dict[str, np.ndarray] = {}
    for name, shape in header.get("tensors", []):
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise CorruptCheckpoint(f"{path}: truncated tensor block '{name}'")
        arr = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8").reshape(shape)
        tensors[name] = arr
        offset += nbytes
    if offset != len(raw):
        raise CorruptCheckpoint(f"{path}: {len(raw) - offset} trailing bytes")
    return header, tensors


def check_tensor_shapes(
    expected: dict[str, tuple[int, ...]], tensors: dict[str, np.ndarray], context: str = ""
) -> None:
    """Raise CorruptCheckpoint if names or shapes disagree (both sides named)."""
    missing = set(expected) - set(tensors)
    extra = set(tensors) - set(expected)
    if missing or extra:
        raise CorruptCheckpoint(
            f"{context}: tensor names differ (missing {sorted(missing)}, unexpected {sorted(extra)})"
        )
    for name, shape in expected.items():
        got = tuple(tensors[name].shape)
        if got != tuple(shape):
            raise CorruptCheckpoint(
                f"{context}: tensor '{name}' has shape {got}, model expects {tuple(shape)}"
            )
