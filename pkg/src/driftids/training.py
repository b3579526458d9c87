"""Composite-loss evaluation, full backpropagation, and the training loop.

``batch_loss`` evaluates the training objective as a pure function of the
parameters; ``batch_gradients`` additionally backpropagates it into parameter
gradients. Keeping both paths separate lets tests compare analytic gradients
against finite differences of the loss alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autoencoder as ae
from .autoencoder import AdamState, EncoderSnapshot, MlpParams
from .losses import (
    LossWeights,
    TripletBatch,
    composite_loss,
    continual_learning_loss,
    mine_triplets,
    mine_triplets_hard,
    reconstruction_loss,
    triplet_margin_loss,
)


@dataclass(frozen=True)
class LossParts:
    cluster_separation: float
    reconstruction: float
    continual: float
    total: float
    cs_skipped: bool = False


def batch_loss(
    params: MlpParams,
    x: np.ndarray,
    triplets: TripletBatch | None,
    snapshots: list[EncoderSnapshot],
    weights: LossWeights,
) -> LossParts:
    """Evaluate the composite loss on one batch without any gradients."""
    h = ae.encode(params, x)
    x_hat = ae.decode(params, h)
    cs = triplet_margin_loss(h, triplets, weights.margin)[0] if triplets is not None else 0.0
    recon = reconstruction_loss(x, x_hat)[0]
    continual = continual_learning_loss(h, snapshots, x)[0] if snapshots else 0.0
    total = composite_loss(cs, recon, continual, weights)
    return LossParts(cs, recon, continual, total, cs_skipped=triplets is None)


def batch_gradients(
    params: MlpParams,
    x: np.ndarray,
    triplets: TripletBatch | None,
    snapshots: list[EncoderSnapshot],
    weights: LossWeights,
) -> tuple[LossParts, list[np.ndarray]]:
    """Loss parts plus parameter gradients aligned with ``flat_arrays()``.

    The reconstruction path backpropagates through the decoder into the
    encoder; the separation and continual terms contribute directly at the
    latent layer. Snapshot encoders are frozen, so their only role is to
    supply targets.
    """
    x = np.asarray(x, dtype=np.float64)
    h, enc_cache = ae.encode_with_cache(params, x)
    x_hat, dec_cache = ae.decode_with_cache(params, h)

    if triplets is not None:
        cs, grad_h_cs = triplet_margin_loss(h, triplets, weights.margin)
    else:
        cs, grad_h_cs = 0.0, np.zeros_like(h)
    recon, grad_xhat = reconstruction_loss(x, x_hat)
    if snapshots:
        continual, grad_h_cl = continual_learning_loss(h, snapshots, x)
    else:
        continual, grad_h_cl = 0.0, np.zeros_like(h)
    total = composite_loss(cs, recon, continual, weights)

    dec_gw, dec_gb, grad_h_recon = ae.decoder_backward(params, dec_cache, weights.lambda_recon * grad_xhat)
    grad_h = grad_h_cs + grad_h_recon + weights.lambda_continual * grad_h_cl
    enc_gw, enc_gb, _ = ae.encoder_backward(params, enc_cache, grad_h)

    grads: list[np.ndarray] = []
    for gw, gb in zip(enc_gw, enc_gb):
        grads.extend([gw, gb])
    for gw, gb in zip(dec_gw, dec_gb):
        grads.extend([gw, gb])
    parts = LossParts(cs, recon, continual, total, cs_skipped=triplets is None)
    return parts, grads


@dataclass
class TrainSettings:
    """Knobs consumed by the per-experience training loop."""

    epochs: int = 10
    batch_size: int = 256
    max_triplets: int = 128
    weights: LossWeights = None  # type: ignore[assignment]
    use_cluster_separation: bool = True
    triplet_mining: str = "random"  # or "hard" (batch-hard)

    def __post_init__(self) -> None:
        if self.weights is None:
            self.weights = LossWeights()
        if self.triplet_mining not in ("random", "hard"):
            raise ValueError(f"unknown triplet_mining '{self.triplet_mining}'")


def train_experience(
    params: MlpParams,
    adam: AdamState,
    x_train: np.ndarray,
    pseudo_labels: np.ndarray,
    snapshots: list[EncoderSnapshot],
    settings: TrainSettings,
    rng: np.random.Generator,
    log_rows: list[dict] | None = None,
    experience_index: int = 0,
) -> list[LossParts]:
    """Train the autoencoder on one experience's unlabeled pool.

    Pseudo-labels stay fixed for all epochs; triplets are re-mined per batch
    from the labels of that batch's rows. Only the current pool and the
    frozen snapshots are touched, never raw data from past experiences.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    pseudo_labels = np.asarray(pseudo_labels)
    if x_train.shape[0] != pseudo_labels.shape[0]:
        raise ValueError("pseudo-labels must align with training rows")
    n = x_train.shape[0]
    history: list[LossParts] = []
    for epoch in range(settings.epochs):
        order = rng.permutation(n)
        for start in range(0, n, settings.batch_size):
            batch_idx = order[start : start + settings.batch_size]
            batch = x_train[batch_idx]
            triplets = None
            if settings.use_cluster_separation:
                count = min(batch_idx.size, settings.max_triplets)
                if settings.triplet_mining == "hard":
                    h = ae.encode(params, batch)
                    triplets = mine_triplets_hard(h, pseudo_labels[batch_idx], count, rng)
                else:
                    triplets = mine_triplets(pseudo_labels[batch_idx], count, rng)
            parts, grads = batch_gradients(params, batch, triplets, snapshots, settings.weights)
            ae.train_step(params, adam, grads)
            history.append(parts)
            if log_rows is not None:
                log_rows.append(
                    {
                        "experience": experience_index,
                        "epoch": epoch,
                        "batch_start": int(start),
                        "loss_cluster_separation": parts.cluster_separation,
                        "loss_reconstruction": parts.reconstruction,
                        "loss_continual": parts.continual,
                        "loss_total": parts.total,
                        "cs_skipped": parts.cs_skipped,
                    }
                )
    return history
