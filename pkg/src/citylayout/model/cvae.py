"""Conditional VAE over layout graphs: GAT encoder to a Gaussian posterior,
GAT decoder from (positional embedding, z, condition) to per-slot heads and
per-edge weight-bin logits, and the weighted ELBO objective.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..blockgraph import NODE_FEATURES, LayoutGraph, grid_edge_list
from ..config import EDGE_BINS, GRID_COLS, GRID_ROWS, HEIGHT_BINS
from ..errors import ShapeError
from .gat import GATLayer


@dataclass(frozen=True)
class ModelConfig:
    rows: int = GRID_ROWS
    cols: int = GRID_COLS
    node_feat: int = NODE_FEATURES
    hidden: int = 128
    latent: int = 128
    heads: int = 4
    gat_layers: int = 3
    height_bins: int = HEIGHT_BINS
    edge_bins: int = EDGE_BINS
    cond_dim: int = 135
    negative_slope: float = 0.2

    @property
    def n_slots(self) -> int:
        return self.rows * self.cols

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 250
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    w_exist: float = 1.0
    w_pos: float = 1.0
    w_size: float = 1.0
    w_height: float = 4.0
    w_shape: float = 1.0
    w_iou: float = 1.0
    w_edge: float = 1.0
    w_kl: float = 0.5

    def to_dict(self) -> dict:
        return asdict(self)


def _directed_edges(rows: int, cols: int) -> tuple[torch.Tensor, torch.Tensor]:
    """(tgt, src) arrays: both directions of every grid edge, then self-loops."""
    n = rows * cols
    und = grid_edge_list(rows, cols)
    a = torch.tensor([e[0] for e in und])
    b = torch.tensor([e[1] for e in und])
    loops = torch.arange(n)
    tgt = torch.cat([a, b, loops])
    src = torch.cat([b, a, loops])
    return tgt, src


class GraphCVAE(nn.Module):
    def __init__(self, cfg: ModelConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.cfg = cfg
        if cfg.hidden % cfg.heads != 0:
            raise ShapeError(f"hidden {cfg.hidden} not divisible by heads {cfg.heads}")
        head_dim = cfg.hidden // cfg.heads
        n = cfg.n_slots

        self.node_proj = nn.Linear(cfg.node_feat + cfg.cond_dim, cfg.hidden)
        self.enc_layers = nn.ModuleList(
            GATLayer(cfg.hidden, head_dim, cfg.heads, cfg.negative_slope)
            for _ in range(cfg.gat_layers)
        )
        self.mu_head = nn.Linear(cfg.hidden, cfg.latent)
        self.logvar_head = nn.Linear(cfg.hidden, cfg.latent)

        self.pos_embed = nn.Parameter(torch.randn(n, cfg.hidden))
        self.dec_proj = nn.Linear(cfg.hidden + cfg.latent + cfg.cond_dim, cfg.hidden)
        self.dec_layers = nn.ModuleList(
            GATLayer(cfg.hidden, head_dim, cfg.heads, cfg.negative_slope)
            for _ in range(cfg.gat_layers)
        )
        self.head_exist = nn.Linear(cfg.hidden, 1)
        self.head_pos = nn.Linear(cfg.hidden, 2)
        self.head_size = nn.Linear(cfg.hidden, 2)
        self.head_height = nn.Linear(cfg.hidden, cfg.height_bins)
        self.head_shape = nn.Linear(cfg.hidden, 8)
        self.head_iou = nn.Linear(cfg.hidden, 1)
        self.head_edge = nn.Linear(2 * cfg.hidden, cfg.edge_bins)

        edge_list = grid_edge_list(cfg.rows, cfg.cols)
        self.register_buffer("edge_a", torch.tensor([e[0] for e in edge_list]))
        self.register_buffer("edge_b", torch.tensor([e[1] for e in edge_list]))
        tgt, src = _directed_edges(cfg.rows, cfg.cols)
        self.register_buffer("edge_tgt", tgt)
        self.register_buffer("edge_src", src)
        self.to(dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.node_proj.weight.dtype

    def encode(
        self, feats: torch.Tensor, cond: torch.Tensor, edge_w: torch.Tensor, occ: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """feats: (B, N, F); cond: (B, C); edge_w: (B, E) in grid-edge order;
        occ: (B, N) bool."""
        B, N, _ = feats.shape
        x = torch.cat([feats, cond.unsqueeze(1).expand(B, N, cond.shape[-1])], dim=-1)
        h = self.node_proj(x)
        # neighborhoods: occupied grid neighbors plus self (weight 1)
        loops = torch.ones(B, N, dtype=h.dtype)
        w_dir = torch.cat([edge_w, edge_w, loops], dim=1)
        occf = occ.to(h.dtype)
        n_und = self.edge_a.shape[0]
        mask = torch.cat([occf[:, self.edge_src[: 2 * n_und]], loops], dim=1)
        for layer in self.enc_layers:
            # residual keeps per-slot identity through attention averaging
            h = h + layer(h, self.edge_tgt, self.edge_src, w_dir, mask)
        n_occ = occ.sum(dim=1, keepdim=True).to(h.dtype)
        pooled = (h * occf.unsqueeze(-1)).sum(dim=1) / torch.clamp(n_occ, min=1.0)
        empty = n_occ.squeeze(1) == 0
        if bool(empty.any()):
            pooled = torch.where(
                empty.unsqueeze(-1), self.pos_embed.mean(dim=0).expand(B, -1), pooled
            )
        return self.mu_head(pooled), self.logvar_head(pooled)

    def decode(self, z: torch.Tensor, cond: torch.Tensor) -> dict[str, torch.Tensor]:
        """Runs the decoder on the full slot grid, every grid edge at weight 1."""
        B = z.shape[0]
        N = self.cfg.n_slots
        x = torch.cat(
            [
                self.pos_embed.unsqueeze(0).expand(B, N, -1),
                z.unsqueeze(1).expand(B, N, -1),
                cond.unsqueeze(1).expand(B, N, -1),
            ],
            dim=-1,
        )
        h = self.dec_proj(x)
        w = torch.ones(self.edge_tgt.shape[0], dtype=h.dtype)
        for layer in self.dec_layers:
            h = h + layer(h, self.edge_tgt, self.edge_src, w)
        pair = torch.cat([h[:, self.edge_a], h[:, self.edge_b]], dim=-1)
        return {
            "exist": self.head_exist(h).squeeze(-1),
            "pos": torch.sigmoid(self.head_pos(h)),
            "size": torch.sigmoid(self.head_size(h)),
            "height": self.head_height(h),
            "shape": self.head_shape(h),
            "iou": torch.sigmoid(self.head_iou(h)).squeeze(-1),
            "edge": self.head_edge(pair),
        }

    def forward(self, feats, cond, edge_w, occ, eps: Optional[torch.Tensor] = None):
        mu, logvar = self.encode(feats, cond, edge_w, occ)
        if eps is None:
            eps = torch.randn_like(mu)
        z = reparameterize(mu, logvar, eps)
        return self.decode(z, cond), mu, logvar


def reparameterize(mu: torch.Tensor, logvar: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """z = mu + exp(logvar / 2) * eps."""
    return mu + torch.exp(0.5 * logvar) * eps


def kl_standard_normal(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Closed-form KL(q || N(0, I)), summed over latent dims, averaged over batch."""
    per_sample = 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar).sum(dim=-1)
    return per_sample.mean()


def elbo_loss(
    preds: dict[str, torch.Tensor],
    targets: dict[str, torch.Tensor],
    mu: torch.Tensor,
    logvar: torch.Tensor,
    cfg: TrainConfig,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted negative ELBO with per-term breakdown.

    Continuous and categorical node terms average over occupied slots only;
    existence covers every slot; edge cross-entropy covers occupied-occupied
    grid edges.
    """
    occ = targets["occ"]
    zero = mu.new_zeros(())

    exist = F.binary_cross_entropy_with_logits(preds["exist"], targets["e"])
    if bool(occ.any()):
        pos = ((preds["pos"] - targets["pos"]) ** 2)[occ].mean()
        size = ((preds["size"] - targets["size"]) ** 2)[occ].mean()
        height = F.cross_entropy(preds["height"][occ], targets["hbin"][occ])
        shape = F.cross_entropy(preds["shape"][occ], targets["sbin"][occ])
        iou = ((preds["iou"] - targets["a"]) ** 2)[occ].mean()
    else:
        pos = size = height = shape = iou = zero
    emask = targets["emask"]
    if bool(emask.any()):
        edge = F.cross_entropy(preds["edge"][emask], targets["ebin"][emask])
    else:
        edge = zero
    kl = kl_standard_normal(mu, logvar)

    total = (
        cfg.w_exist * exist
        + cfg.w_pos * pos
        + cfg.w_size * size
        + cfg.w_height * height
        + cfg.w_shape * shape
        + cfg.w_iou * iou
        + cfg.w_edge * edge
        + cfg.w_kl * kl
    )
    parts = {
        "exist": float(exist.detach()),
        "pos": float(pos.detach()),
        "size": float(size.detach()),
        "height": float(height.detach()),
        "shape": float(shape.detach()),
        "iou": float(iou.detach()),
        "edge": float(edge.detach()),
        "kl": float(kl.detach()),
        "total": float(total.detach()),
    }
    return total, parts


def tensorize(
    graphs: Sequence[LayoutGraph],
    conds: Sequence[np.ndarray],
    cfg: ModelConfig,
    dtype: torch.dtype = torch.float32,
) -> dict[str, torch.Tensor]:
    """Stack layout graphs and condition vectors into training tensors."""
    if len(graphs) != len(conds):
        raise ShapeError(f"{len(graphs)} graphs vs {len(conds)} conditions")
    feats, occs, ews, cvecs = [], [], [], []
    hbins, sbins, ebins, emasks = [], [], [], []
    for g, c in zip(graphs, conds):
        if g.rows != cfg.rows or g.cols != cfg.cols:
            raise ShapeError(f"graph grid {g.rows}x{g.cols} != model grid {cfg.rows}x{cfg.cols}")
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (cfg.cond_dim,):
            raise ShapeError(f"condition dim {c.shape} != ({cfg.cond_dim},)")
        f = g.node_features()
        occ = g.occupancy()
        feats.append(f)
        occs.append(occ)
        ews.append(g.edge_weight_vector())
        cvecs.append(c)
        hbins.append(np.clip((f[:, 5] * cfg.height_bins).astype(int), 0, cfg.height_bins - 1))
        sbins.append(np.argmax(f[:, 6:14], axis=1))
        ev = g.edge_weight_vector()
        ebins.append(np.clip((ev * cfg.edge_bins).astype(int), 0, cfg.edge_bins - 1))
        em = np.array(
            [occ[a] and occ[b] for a, b, _k in grid_edge_list(cfg.rows, cfg.cols)], dtype=bool
        )
        emasks.append(em)
    feats_t = torch.as_tensor(np.stack(feats), dtype=dtype)
    return {
        "feats": feats_t,
        "cond": torch.as_tensor(np.stack(cvecs), dtype=dtype),
        "edge_w": torch.as_tensor(np.stack(ews), dtype=dtype),
        "occ": torch.as_tensor(np.stack(occs)),
        "e": feats_t[:, :, 0].clone(),
        "pos": feats_t[:, :, 1:3].clone(),
        "size": feats_t[:, :, 3:5].clone(),
        "hbin": torch.as_tensor(np.stack(hbins), dtype=torch.long),
        "sbin": torch.as_tensor(np.stack(sbins), dtype=torch.long),
        "a": feats_t[:, :, 14].clone(),
        "ebin": torch.as_tensor(np.stack(ebins), dtype=torch.long),
        "emask": torch.as_tensor(np.stack(emasks)),
    }
