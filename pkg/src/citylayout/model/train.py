"""Training loop for the graph CVAE: seeded shuffling, Adam, per-epoch mean
loss, plus training-set reconstruction diagnostics."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch

from ..errors import EmptyDataset
from .cvae import GraphCVAE, ModelConfig, TrainConfig, elbo_loss


def _slice(tensors: dict[str, torch.Tensor], idx: torch.Tensor) -> dict[str, torch.Tensor]:
    return {k: v[idx] for k, v in tensors.items()}


def train(
    tensors: dict[str, torch.Tensor],
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    dtype: torch.dtype = torch.float32,
) -> tuple[GraphCVAE, list[float]]:
    """Train a fresh GraphCVAE; returns the model and per-epoch mean loss.

    Deterministic given ``cfg.seed``: initialization, minibatch order and the
    reparameterization noise all derive from one torch generator.
    """
    n = tensors["feats"].shape[0]
    if n == 0:
        raise EmptyDataset("training needs at least one layout graph")
    torch.manual_seed(cfg.seed)
    model = GraphCVAE(model_cfg, dtype=dtype)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    gen = torch.Generator().manual_seed(cfg.seed)

    curve: list[float] = []
    for _epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=gen)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = _slice(tensors, idx)
            eps = torch.randn(len(idx), model_cfg.latent, generator=gen, dtype=model.dtype)
            opt.zero_grad()
            preds, mu, logvar = model(
                batch["feats"], batch["cond"], batch["edge_w"], batch["occ"], eps=eps
            )
            loss, _parts = elbo_loss(preds, batch, mu, logvar, cfg)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
            seen += len(idx)
        curve.append(total / seen)
    model.eval()
    return model, curve


@torch.no_grad()
def reconstruction_metrics(
    model: GraphCVAE, tensors: dict[str, torch.Tensor], batch_size: int = 32
) -> dict[str, float]:
    """Posterior-mean reconstruction quality on a dataset.

    existence_accuracy counts every slot; position_mse averages squared error
    over occupied slots and both coordinates.
    """
    n = tensors["feats"].shape[0]
    correct = 0
    slots = 0
    sq = 0.0
    npos = 0
    for start in range(0, n, batch_size):
        idx = torch.arange(start, min(start + batch_size, n))
        b = _slice(tensors, idx)
        mu, logvar = model.encode(b["feats"], b["cond"], b["edge_w"], b["occ"])
        preds = model.decode(mu, b["cond"])
        pred_e = preds["exist"] >= 0.0  # sigmoid(logit) >= 0.5
        correct += int((pred_e == (b["e"] >= 0.5)).sum())
        slots += pred_e.numel()
        occ = b["occ"]
        if bool(occ.any()):
            d = ((preds["pos"] - b["pos"]) ** 2)[occ]
            sq += float(d.sum())
            npos += d.numel()
    return {
        "existence_accuracy": correct / slots,
        "position_mse": sq / npos if npos else 0.0,
    }
