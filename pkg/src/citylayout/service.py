"""HTTP API for the interactive what-if workflow: upload a district, edit
per-block land use, regenerate selected blocks, fetch the current layout.

Sessions are in-memory. The model snapshot is shared read-only; each district
serializes its mutations behind a lock. Regeneration is local: blocks outside
the requested set keep their stored layouts untouched.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .artifactio import GeneratedLayout, export_geojson
from .errors import InvalidGeometry
from .geometry import Polygon
from .pipeline import UrbanLayoutModel


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail: str):
        self.status = status
        self.error = error
        self.detail = detail
        super().__init__(detail)


class PatchLandUse(BaseModel):
    land_use: int


class GenerateRequest(BaseModel):
    block_ids: Optional[list[str]] = None
    seed: Optional[int] = None


@dataclass
class _Block:
    id: str
    boundary: Polygon
    land_use: int
    stale: bool = True
    counter: int = 0


@dataclass
class _District:
    id: str
    blocks: dict[str, _Block]
    order: list[str]
    layouts: dict[str, GeneratedLayout] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _summary(b: _Block, layouts: dict[str, GeneratedLayout]) -> dict:
    layout = layouts.get(b.id)
    return {
        "id": b.id,
        "land_use": b.land_use,
        "stale": b.stale,
        "generated": layout is not None,
        "n_buildings": len(layout.buildings) if layout else 0,
    }


def create_app(model: Optional[UrbanLayoutModel] = None, base_seed: int = 0) -> FastAPI:
    app = FastAPI(title="citylayout what-if service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["ETag"],
    )
    districts: dict[str, _District] = {}
    n_classes = model.n_classes if model is not None else 5

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.error, "detail": exc.detail}
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422, content={"error": "validation_error", "detail": str(exc.errors())}
        )

    def _district(did: str) -> _District:
        d = districts.get(did)
        if d is None:
            raise ApiError(404, "unknown_district", f"no district '{did}'")
        return d

    @app.post("/districts", status_code=201)
    async def create_district(request: Request):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ApiError(400, "invalid_json", str(exc))
        if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
            raise ApiError(400, "invalid_geojson", "expected a FeatureCollection")
        blocks: dict[str, _Block] = {}
        order: list[str] = []
        for i, feat in enumerate(doc.get("features", [])):
            props = feat.get("properties") or {}
            geom = feat.get("geometry") or {}
            bid = props.get("id", f"block{i}")
            land_use = props.get("land_use")
            if land_use is None or not (0 <= int(land_use) < n_classes):
                raise ApiError(400, "invalid_land_use", f"feature {i}: land_use missing or out of range")
            if geom.get("type") != "Polygon" or not geom.get("coordinates"):
                raise ApiError(400, "invalid_geometry", f"feature {i}: polygon geometry required")
            try:
                poly = Polygon(geom["coordinates"][0])
            except InvalidGeometry as exc:
                raise ApiError(400, "invalid_geometry", f"feature {i}: {exc}")
            blocks[str(bid)] = _Block(str(bid), poly, int(land_use))
            order.append(str(bid))
        if not blocks:
            raise ApiError(400, "empty_district", "no block features")
        did = uuid.uuid4().hex[:12]
        districts[did] = _District(id=did, blocks=blocks, order=order)
        d = districts[did]
        return {"district_id": did, "blocks": [_summary(d.blocks[b], d.layouts) for b in d.order]}

    @app.get("/districts/{did}/blocks")
    async def get_blocks(did: str):
        d = _district(did)
        return {"district_id": did, "blocks": [_summary(d.blocks[b], d.layouts) for b in d.order]}

    @app.patch("/districts/{did}/blocks/{bid}")
    async def patch_landuse(did: str, bid: str, body: PatchLandUse):
        d = _district(did)
        block = d.blocks.get(bid)
        if block is None:
            raise ApiError(404, "unknown_block", f"no block '{bid}' in district '{did}'")
        if not (0 <= body.land_use < n_classes):
            raise ApiError(422, "invalid_land_use", f"land_use must be in 0..{n_classes - 1}")
        with d.lock:
            block.land_use = body.land_use
            block.stale = True
        return _summary(block, d.layouts)

    @app.post("/districts/{did}/generate")
    async def generate(did: str, body: GenerateRequest):
        d = _district(did)
        if model is None:
            raise ApiError(409, "no_model", "no model snapshot loaded")
        with d.lock:
            if body.block_ids is None:
                targets = [b for b in d.order if d.blocks[b].stale]
            else:
                unknown = [b for b in body.block_ids if b not in d.blocks]
                if unknown:
                    raise ApiError(404, "unknown_block", f"unknown block ids {unknown}")
                targets = list(body.block_ids)
            for bid in targets:
                block = d.blocks[bid]
                if body.seed is not None:
                    seed, counter = int(body.seed), 0
                else:
                    block.counter += 1
                    seed, counter = base_seed, block.counter
                d.layouts[bid] = model.generate(
                    block.boundary, block.land_use, seed=seed, block_id=bid, counter=counter
                )
                block.stale = False
            return {
                "district_id": did,
                "regenerated": targets,
                "blocks": [_summary(d.blocks[b], d.layouts) for b in d.order],
            }

    @app.get("/districts/{did}/layout")
    async def get_layout(did: str):
        d = _district(did)
        with d.lock:
            doc = export_geojson([d.layouts[b] for b in d.order if b in d.layouts])
        etag = hashlib.sha256(doc.encode()).hexdigest()
        return Response(content=doc, media_type="application/geo+json", headers={"ETag": etag})

    return app
