"""End-to-end estimator: block records in, trained generator out.

Follows the scikit-learn protocol: constructor stores hyperparameters,
``fit`` learns state into trailing-underscore attributes, ``get_params`` /
``set_params`` come from BaseEstimator. Training is two-stage: the block
autoencoder is fit and frozen first, then the graph CVAE.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .artifactio import GeneratedBuilding, GeneratedLayout, load_checkpoint, save_checkpoint
from .condition import BlockEncoder, condition_dim
from .config import (
    EDGE_BINS,
    EMBED_DIM,
    GRID_COLS,
    GRID_ROWS,
    HEIGHT_BINS,
    HEIGHT_CAP_M,
    LANDUSE_CLASSES,
    RASTER_SIZE,
)
from .errors import CorruptCheckpoint, EmptyDataset
from .geometry import Polygon
from .ingest import BlockRecord, build_dataset
from .model import (
    GraphCVAE,
    ModelConfig,
    TrainConfig,
    reconstruction_metrics,
    sample_layout,
    tensorize,
    train,
)

__all__ = ["UrbanLayoutModel"]


class UrbanLayoutModel(BaseEstimator):
    """Learns per-block building layouts conditioned on geometry and land use."""

    def __init__(
        self,
        n_classes: int = len(LANDUSE_CLASSES),
        grid_rows: int = GRID_ROWS,
        grid_cols: int = GRID_COLS,
        hidden_dim: int = 128,
        latent_dim: int = 128,
        attention_heads: int = 4,
        gat_layers: int = 3,
        height_bins: int = HEIGHT_BINS,
        edge_bins: int = EDGE_BINS,
        height_cap: float = HEIGHT_CAP_M,
        embed_dim: int = EMBED_DIM,
        raster_size: int = RASTER_SIZE,
        ae_epochs: int = 200,
        ae_lr: float = 2e-3,
        epochs: int = 250,
        lr: float = 1e-3,
        batch_size: int = 16,
        height_weight: float = 4.0,
        edge_weight: float = 1.0,
        kl_weight: float = 0.5,
        seed: int = 0,
    ):
        self.n_classes = n_classes
        self.grid_rows = grid_rows
        self.grid_cols = grid_cols
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.attention_heads = attention_heads
        self.gat_layers = gat_layers
        self.height_bins = height_bins
        self.edge_bins = edge_bins
        self.height_cap = height_cap
        self.embed_dim = embed_dim
        self.raster_size = raster_size
        self.ae_epochs = ae_epochs
        self.ae_lr = ae_lr
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.height_weight = height_weight
        self.edge_weight = edge_weight
        self.kl_weight = kl_weight
        self.seed = seed

    # -- configuration ------------------------------------------------------

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            rows=self.grid_rows,
            cols=self.grid_cols,
            hidden=self.hidden_dim,
            latent=self.latent_dim,
            heads=self.attention_heads,
            gat_layers=self.gat_layers,
            height_bins=self.height_bins,
            edge_bins=self.edge_bins,
            cond_dim=condition_dim(self.n_classes, self.embed_dim),
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            batch_size=self.batch_size,
            seed=self.seed,
            w_height=self.height_weight,
            w_edge=self.edge_weight,
            w_kl=self.kl_weight,
        )

    # -- training -----------------------------------------------------------

    def fit(self, X: Sequence[BlockRecord], y=None) -> "UrbanLayoutModel":
        """Two-stage training on block records; see module docstring."""
        items, exclusions = build_dataset(
            X,
            n_classes=self.n_classes,
            rows=self.grid_rows,
            cols=self.grid_cols,
            height_cap=self.height_cap,
            raster_size=self.raster_size,
        )
        if not items:
            raise EmptyDataset("no trainable blocks after filtering")
        self.exclusions_ = exclusions

        rasters = np.stack([it.raster for it in items])
        encoder = BlockEncoder(
            embed_dim=self.embed_dim,
            raster_size=self.raster_size,
            epochs=self.ae_epochs,
            lr=self.ae_lr,
            seed=self.seed,
        ).fit(rasters)
        self.encoder_ = encoder
        self.ae_loss_history_ = encoder.loss_history_

        embeds = encoder.transform(rasters)
        conds = []
        for it, emb in zip(items, embeds):
            onehot = np.zeros(self.n_classes, dtype=np.float32)
            onehot[it.record.land_use] = 1.0
            conds.append(
                np.concatenate([emb, onehot, np.array([it.l_hat, it.p_hat], dtype=np.float32)])
            )
        tensors = tensorize([it.graph for it in items], conds, self.model_config())
        self.cvae_, self.loss_curve_ = train(tensors, self.model_config(), self.train_config())
        self.train_tensors_ = tensors
        self.n_train_blocks_ = len(items)
        return self

    def reconstruction_report(self) -> dict[str, float]:
        check_is_fitted(self, "cvae_")
        return reconstruction_metrics(self.cvae_, self.train_tensors_)

    # -- generation ---------------------------------------------------------

    def generate(
        self,
        block: Polygon,
        land_use: int,
        seed: int = 0,
        block_id: str = "",
        counter: int = 0,
    ) -> GeneratedLayout:
        check_is_fitted(self, "cvae_")
        decoded = sample_layout(
            block,
            land_use,
            self.cvae_,
            self.encoder_,
            self.n_classes,
            seed=seed,
            block_id=block_id,
            counter=counter,
            height_cap=self.height_cap,
        )
        buildings = tuple(
            GeneratedBuilding(d.footprint, d.height, d.shape, land_use) for d in decoded
        )
        return GeneratedLayout(block_id=block_id, buildings=buildings)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        check_is_fitted(self, "cvae_")
        tensors: dict[str, np.ndarray] = {}
        # buffers (edge indices) are reconstructed from the config on load
        for name, tensor in self.cvae_.named_parameters():
            tensors[f"cvae.{name}"] = tensor.detach().cpu().numpy().astype(np.float64)
        for name, arr in self.encoder_.state_tensors().items():
            tensors[f"ae.{name}"] = np.asarray(arr, dtype=np.float64)
        meta = {
            "kind": "citylayout-model",
            "params": self.get_params(),
            "model_config": self.model_config().to_dict(),
            "train_config": self.train_config().to_dict(),
        }
        save_checkpoint(path, meta, tensors)

    @classmethod
    def load(cls, path) -> "UrbanLayoutModel":
        header, tensors = load_checkpoint(path)
        if header.get("kind") != "citylayout-model":
            raise CorruptCheckpoint(f"{path}: not a citylayout model checkpoint")
        est = cls(**header["params"])
        cvae = GraphCVAE(est.model_config())
        state = cvae.state_dict()  # buffers keep their constructed values
        for name, tensor in cvae.named_parameters():
            key = f"cvae.{name}"
            if key not in tensors:
                raise CorruptCheckpoint(f"{path}: missing tensor '{key}'")
            got = tensors[key]
            if tuple(got.shape) != tuple(tensor.shape):
                raise CorruptCheckpoint(
                    f"{path}: tensor '{key}' has shape {tuple(got.shape)}, "
                    f"model expects {tuple(tensor.shape)}"
                )
            state[name] = torch.from_numpy(got.astype(np.float32)).to(tensor.dtype)
        cvae.load_state_dict(state)
        cvae.eval()
        est.cvae_ = cvae
        encoder = BlockEncoder(
            embed_dim=est.embed_dim,
            raster_size=est.raster_size,
            epochs=est.ae_epochs,
            lr=est.ae_lr,
            seed=est.seed,
        )
        ae_tensors = {
            name[3:]: arr for name, arr in tensors.items() if name.startswith("ae.")
        }
        if not ae_tensors:
            raise CorruptCheckpoint(f"{path}: missing block-encoder tensors")
        encoder.load_state_tensors(ae_tensors)
        est.encoder_ = encoder
        est.loss_curve_ = []
        return est
