"""Edge-weighted graph-attention conditional VAE over layout graphs."""

from .cvae import GraphCVAE, ModelConfig, TrainConfig, elbo_loss, reparameterize, tensorize
from .gat import GATLayer
from .gradcheck import gradient_check
from .sample import sample_fields, sample_layout
from .train import reconstruction_metrics, train

__all__ = [
    "GATLayer",
    "GraphCVAE",
    "ModelConfig",
    "TrainConfig",
    "elbo_loss",
    "reparameterize",
    "tensorize",
    "train",
    "reconstruction_metrics",
    "sample_fields",
    "sample_layout",
    "gradient_check",
]
