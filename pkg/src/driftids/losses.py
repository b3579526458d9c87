"""Loss terms for the continual feature extractor and their output gradients.

Each loss returns its value together with the gradient with respect to the
network output it consumes (latent batch or reconstruction batch); the
autoencoder's backward pass turns those into parameter gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autoencoder import EncoderSnapshot
from .clustering import PseudoLabels

# Guard for the gradient of a Euclidean distance at (near) zero separation.
_DIST_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Mixing weights of the composite training loss."""

    lambda_recon: float = 0.1
    lambda_continual: float = 0.1
    margin: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_recon <= 1.0:
            raise ValueError("lambda_recon must lie in [0, 1]")
        if not 0.0 <= self.lambda_continual <= 1.0:
            raise ValueError("lambda_continual must lie in [0, 1]")
        if self.margin <= 0.0:
            raise ValueError("margin must be positive")


@dataclass(frozen=True)
class TripletBatch:
    """Index triples (anchor, positive, negative) into one batch."""

    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.anchors) == len(self.positives) == len(self.negatives)):
            raise ValueError("anchor/positive/negative index counts must match")

    def __len__(self) -> int:
        return len(self.anchors)


def _triplet_pools(labels: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Eligible (same-class, other-class) index pools; empty if no triplet fits."""
    class0 = np.flatnonzero(labels == 0)
    class1 = np.flatnonzero(labels == 1)
    if class0.size == 0 or class1.size == 0:
        return []
    pools = []
    if class0.size >= 2:
        pools.append((class0, class1))
    if class1.size >= 2:
        pools.append((class1, class0))
    return pools


def mine_triplets(
    labels: np.ndarray, max_triplets: int, rng: np.random.Generator
) -> TripletBatch | None:
    """Sample random triplets under the batch's pseudo-labels.

    Anchors are drawn from classes with at least two members, positives from
    the anchor's class (excluding the anchor), negatives from the other
    class. Returns None when the batch cannot form a single valid triplet.
    """
    pools = _triplet_pools(np.asarray(labels))
    if not pools:
        return None
    anchors = np.empty(max_triplets, dtype=np.int64)
    positives = np.empty(max_triplets, dtype=np.int64)
    negatives = np.empty(max_triplets, dtype=np.int64)
    for i in range(max_triplets):
        same, other = pools[rng.integers(len(pools))]
        a = same[rng.integers(same.size)]
        p = a
        while p == a:
            p = same[rng.integers(same.size)]
        anchors[i] = a
        positives[i] = p
        negatives[i] = other[rng.integers(other.size)]
    return TripletBatch(anchors, positives, negatives)


def mine_triplets_hard(
    h: np.ndarray, labels: np.ndarray, max_triplets: int, rng: np.random.Generator
) -> TripletBatch | None:
    """Hard-negative mining: random positive, closest other-class negative.

    Anchors are a seeded subsample so the triplet count stays bounded. The
    hard negative keeps pressure on the class boundary where random mining
    goes idle; positives stay random so the within-class spread is not
    crushed.
    """
    labels = np.asarray(labels)
    pools = _triplet_pools(labels)
    if not pools:
        return None
    h = np.asarray(h, dtype=np.float64)
    eligible = np.concatenate([same for same, _ in pools])
    if eligible.size > max_triplets:
        eligible = eligible[rng.permutation(eligible.size)[:max_triplets]]
    anchors, positives, negatives = [], [], []
    for a in eligible:
        same = np.flatnonzero(labels == labels[a])
        other = np.flatnonzero(labels != labels[a])
        same = same[same != a]
        anchors.append(a)
        positives.append(same[rng.integers(same.size)])
        sq = ((h[other] - h[a]) ** 2).sum(axis=1)
        negatives.append(other[int(np.argmin(sq))])
    return TripletBatch(
        np.asarray(anchors, dtype=np.int64),
        np.asarray(positives, dtype=np.int64),
        np.asarray(negatives, dtype=np.int64),
    )


def triplet_margin_loss(
    h: np.ndarray, triplets: TripletBatch, margin: float
) -> tuple[float, np.ndarray]:
    """Hinge on Euclidean anchor-positive vs anchor-negative distances.

    Averaged over triplets; the subgradient at the hinge kink is zero.
    """
    h = np.asarray(h, dtype=np.float64)
    grad = np.zeros_like(h)
    a, p, n = triplets.anchors, triplets.positives, triplets.negatives
    ap = h[a] - h[p]
    an = h[a] - h[n]
    d_ap = np.sqrt((ap * ap).sum(axis=1))
    d_an = np.sqrt((an * an).sum(axis=1))
    values = d_ap - d_an + margin
    active = values > 0.0
    loss = float(np.maximum(values, 0.0).mean())
    if not active.any():
        return loss, grad
    scale = 1.0 / len(triplets)
    unit_ap = ap[active] / np.maximum(d_ap[active], _DIST_EPS)[:, None]
    unit_an = an[active] / np.maximum(d_an[active], _DIST_EPS)[:, None]
    np.add.at(grad, a[active], scale * (unit_ap - unit_an))
    np.add.at(grad, p[active], -scale * unit_ap)
    np.add.at(grad, n[active], scale * unit_an)
    return loss, grad


def cluster_separation_loss(
    h: np.ndarray,
    pseudo: PseudoLabels | np.ndarray,
    margin: float,
    rng: np.random.Generator,
    max_triplets: int = 128,
) -> tuple[float, np.ndarray, bool]:
    """Mine triplets from the pseudo-labels and apply the margin hinge.

    Returns (loss, gradient wrt h, skipped). Degenerate batches (no valid
    triplet) are skipped with zero loss and gradient rather than erroring.
    """
    labels = pseudo.labels if isinstance(pseudo, PseudoLabels) else np.asarray(pseudo)
    h = np.asarray(h, dtype=np.float64)
    triplets = mine_triplets(labels, min(h.shape[0], max_triplets), rng)
    if triplets is None:
        return 0.0, np.zeros_like(h), True
    loss, grad = triplet_margin_loss(h, triplets, margin)
    return loss, grad, False


def reconstruction_loss(x: np.ndarray, x_hat: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all entries; gradient is wrt the reconstruction."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    diff = x_hat - x
    loss = float((diff * diff).mean())
    return loss, 2.0 * diff / diff.size


def continual_learning_loss(
    h_current: np.ndarray, snapshots: list[EncoderSnapshot], x: np.ndarray
) -> tuple[float, np.ndarray]:
    """Anchor the current embedding to every past encoder's embedding of x.

    Sums MSE(h_current, snapshot(x)) over all snapshots; gradients flow only
    through h_current (snapshots are frozen). Empty snapshot lists yield 0.
    """
    h_current = np.asarray(h_current, dtype=np.float64)
    grad = np.zeros_like(h_current)
    loss = 0.0
    for snap in snapshots:
        if snap.latent_dim != h_current.shape[1]:
            raise ValueError(
                f"snapshot from experience {snap.experience_index} has latent dim "
                f"{snap.latent_dim}, current encoder has {h_current.shape[1]}"
            )
        diff = h_current - snap.encode(x)
        loss += float((diff * diff).mean())
        grad += 2.0 * diff / diff.size
    return loss, grad


def composite_loss(
    cluster_separation: float,
    reconstruction: float,
    continual: float,
    weights: LossWeights,
) -> float:
    """Weighted sum of the three training loss terms."""
    parts = (cluster_separation, reconstruction, continual)
    if not all(np.isfinite(parts)):
        raise ValueError(f"non-finite loss parts: {parts}")
    return cluster_separation + weights.lambda_recon * reconstruction + weights.lambda_continual * continual
