"""Conditional layout sampling: condition encoding, counter-based per-block
latent draws, decoding, and de-canonicalization to world geometry."""

from __future__ import annotations

import hashlib

import numpy as np
import torch

from ..blockgraph import DecodedBuilding, degraph, layout_graph_from_fields
from ..condition import BlockEncoder, encode_condition
from ..config import HEIGHT_CAP_M
from ..geometry import Polygon, canonical_frame
from .cvae import GraphCVAE


def block_rng(seed: int, block_id: str, counter: int = 0) -> np.random.Generator:
    """Philox generator keyed by (seed, block id, counter): per-block draws are
    independent of every other block and of generation order."""
    digest = hashlib.blake2b(
        f"{seed}|{block_id}|{counter}".encode(), digest_size=16
    ).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


@torch.no_grad()
def sample_fields(
    model: GraphCVAE, cond: np.ndarray, z: np.ndarray
) -> dict[str, np.ndarray]:
    """Decode one latent draw into thresholded per-slot fields."""
    cfg = model.cfg
    ct = torch.as_tensor(cond, dtype=model.dtype).unsqueeze(0)
    zt = torch.as_tensor(z, dtype=model.dtype).unsqueeze(0)
    preds = model.decode(zt, ct)
    exist = (preds["exist"][0] >= 0.0).numpy().astype(float)  # sigmoid >= 0.5
    pos = preds["pos"][0].numpy()
    size = preds["size"][0].numpy()
    hbin = preds["height"][0].argmax(dim=-1).numpy()
    height = (hbin + 0.5) / cfg.height_bins  # bin-center dequantization
    shape = preds["shape"][0].argmax(dim=-1).numpy()
    iou = preds["iou"][0].numpy()
    ebin = preds["edge"][0].argmax(dim=-1).numpy()
    edge_w = (ebin + 0.5) / cfg.edge_bins
    return {
        "e": exist,
        "x": pos[:, 0],
        "y": pos[:, 1],
        "l": size[:, 0],
        "w": size[:, 1],
        "h": height,
        "s": shape,
        "a": iou,
        "edge_w": edge_w,
    }


def sample_layout(
    block: Polygon,
    u: int,
    model: GraphCVAE,
    encoder: BlockEncoder,
    n_classes: int,
    seed: int,
    block_id: str = "",
    counter: int = 0,
    height_cap: float = HEIGHT_CAP_M,
) -> list[DecodedBuilding]:
    """Generate one block's buildings; deterministic in (inputs, seed, id)."""
    cond = encode_condition(block, u, encoder, n_classes)
    rng = block_rng(seed, block_id, counter)
    z = rng.standard_normal(model.cfg.latent)
    fields = sample_fields(model, cond, z)
    frame = canonical_frame(block)
    graph = layout_graph_from_fields(
        e=fields["e"],
        x=fields["x"],
        y=fields["y"],
        l=fields["l"],
        w=fields["w"],
        h=fields["h"],
        s=fields["s"],
        a=fields["a"],
        frame=frame,
        rows=model.cfg.rows,
        cols=model.cfg.cols,
        block_id=block_id,
        edge_weights=fields["edge_w"],
    )
    return degraph(graph, block, height_cap=height_cap)
