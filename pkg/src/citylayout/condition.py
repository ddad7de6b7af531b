"""Block condition encoding: 4-channel raster, convolutional autoencoder,
and the fused condition vector (128-d code + land-use one-hot + scalars).

The autoencoder is trained first and frozen; the generative model consumes
its bottleneck code. Wrapped as a scikit-learn transformer so the embedding
stage composes with standard pipelines.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
import shapely
import shapely.geometry as sgeom
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted
from torch import nn

from .config import EMBED_DIM, RASTER_SIZE
from .errors import EmptyDataset, InvalidGeometry, ShapeError
from .geometry import CanonicalFrame, Polygon, canonical_frame, to_canonical_many

__all__ = [
    "block_scalars",
    "rasterize_block",
    "BlockEncoder",
    "encode_condition",
    "condition_dim",
]


def block_scalars(frame: CanonicalFrame) -> tuple[float, float]:
    """(l_hat, p_hat): log-scale block size (1 km -> 1.0) and aspect ratio H/W."""
    l_hat = float(np.clip(math.log10(max(frame.width_W, 1e-9)) / 3.0, 0.0, 1.0))
    p_hat = float(frame.height_H / frame.width_W)
    return l_hat, p_hat


def rasterize_block(
    block: Polygon,
    l_hat: float,
    p_hat: float,
    u: int,
    n_classes: int,
    size: int = RASTER_SIZE,
) -> np.ndarray:
    """(4, size, size) float32 raster in the block's canonical frame.

    Channel 0 is the inside-block mask; channels 1-3 carry l_hat, p_hat and
    u/(U-1), all zeroed outside the mask.
    """
    if not (0 <= u < n_classes):
        raise InvalidGeometry(f"land-use class {u} outside 0..{n_classes - 1}")
    frame = canonical_frame(block)
    can = sgeom.Polygon(to_canonical_many(block.array, frame))
    centers = -1.0 + 2.0 * (np.arange(size) + 0.5) / size
    xs, ys = np.meshgrid(centers, centers[::-1])  # row 0 = top of the frame
    mask = shapely.contains_xy(can, xs.ravel(), ys.ravel()).reshape(size, size)

    out = np.zeros((4, size, size), dtype=np.float32)
    out[0] = mask
    out[1] = l_hat * mask
    out[2] = p_hat * mask
    out[3] = (u / (n_classes - 1) if n_classes > 1 else 0.0) * mask
    return out


class _ConvAutoencoder(nn.Module):
    def __init__(self, size: int, embed_dim: int):
        super().__init__()
        if size % 16 != 0:
            raise ShapeError(f"raster size must be divisible by 16, got {size}")
        s = size // 16
        self.encoder = nn.Sequential(
            nn.Conv2d(4, 16, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(64, 128, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Flatten(),
            nn.Linear(128 * s * s, embed_dim),
        )
        self.decoder_fc = nn.Linear(embed_dim, 128 * s * s)
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(128, 64, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.ConvTranspose2d(64, 32, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.ConvTranspose2d(32, 16, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.ConvTranspose2d(16, 4, 4, stride=2, padding=1),
            nn.Sigmoid(),
        )
        self._s = s

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.encode(x)
        h = torch.relu(self.decoder_fc(z)).reshape(-1, 128, self._s, self._s)
        return self.decoder(h)


class BlockEncoder(BaseEstimator, TransformerMixin):
    """Convolutional autoencoder over block rasters; ``transform`` yields the
    bottleneck code used as the learned part of the condition vector."""

    def __init__(
        self,
        embed_dim: int = EMBED_DIM,
        raster_size: int = RASTER_SIZE,
        epochs: int = 200,
        lr: float = 2e-3,
        seed: int = 0,
    ):
        self.embed_dim = embed_dim
        self.raster_size = raster_size
        self.epochs = epochs
        self.lr = lr
        self.seed = seed

    def _validate(self, X) -> torch.Tensor:
        arr = np.asarray(X, dtype=np.float32)
        if arr.ndim != 4 or arr.shape[1] != 4 or arr.shape[2] != self.raster_size:
            raise ShapeError(f"expected (n, 4, {self.raster_size}, {self.raster_size}), got {arr.shape}")
        return torch.from_numpy(arr)

    def fit(self, X, y=None):
        """Full-batch Adam on reconstruction MSE; deterministic given seed."""
        if len(X) == 0:
            raise EmptyDataset("autoencoder needs at least one raster")
        data = self._validate(X)
        torch.manual_seed(self.seed)
        model = _ConvAutoencoder(self.raster_size, self.embed_dim)
        opt = torch.optim.Adam(model.parameters(), lr=self.lr)
        history = []
        for _ in range(self.epochs):
            opt.zero_grad()
            recon = model(data)
            loss = torch.mean((recon - data) ** 2)
            loss.backward()
            opt.step()
            history.append(float(loss.detach()))
        model.eval()
        self.model_ = model
        self.loss_history_ = history
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        data = self._validate(X)
        with torch.no_grad():
            return self.model_.encode(data).numpy()

    def state_tensors(self) -> dict[str, np.ndarray]:
        check_is_fitted(self, "model_")
        return {k: v.detach().numpy() for k, v in self.model_.state_dict().items()}

    def load_state_tensors(self, tensors: dict[str, np.ndarray]) -> "BlockEncoder":
        torch.manual_seed(self.seed)
        model = _ConvAutoencoder(self.raster_size, self.embed_dim)
        model.load_state_dict({k: torch.from_numpy(np.asarray(v, dtype=np.float32)) for k, v in tensors.items()})
        model.eval()
        self.model_ = model
        self.loss_history_ = []
        return self


def condition_dim(n_classes: int, embed_dim: int = EMBED_DIM) -> int:
    return embed_dim + n_classes + 2


def encode_condition(
    block: Polygon,
    u: int,
    encoder: BlockEncoder,
    n_classes: int,
    l_hat: Optional[float] = None,
    p_hat: Optional[float] = None,
) -> np.ndarray:
    """Fused condition vector: [autoencoder code | one-hot(u) | l_hat, p_hat]."""
    frame = canonical_frame(block)
    if l_hat is None or p_hat is None:
        l_hat, p_hat = block_scalars(frame)
    raster = rasterize_block(block, l_hat, p_hat, u, n_classes, encoder.raster_size)
    return encode_condition_raster(raster, u, l_hat, p_hat, encoder, n_classes)


def encode_condition_raster(
    raster: np.ndarray,
    u: int,
    l_hat: float,
    p_hat: float,
    encoder: BlockEncoder,
    n_classes: int,
) -> np.ndarray:
    embed = encoder.transform(raster[None])[0]
    onehot = np.zeros(n_classes, dtype=np.float32)
    onehot[u] = 1.0
    return np.concatenate([embed, onehot, np.array([l_hat, p_hat], dtype=np.float32)])
