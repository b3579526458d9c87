"""Principal-subspace novelty scoring.

A PCA basis is fitted on encoded clean-normal data; a sample's anomaly score
is the squared Euclidean distance between the sample and its projection onto
the retained subspace (its reconstruction through the truncated basis).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (dim,)
    components: np.ndarray  # (k, dim), orthonormal rows
    explained_variance_ratio: np.ndarray  # full spectrum, not just retained
    k: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_pca(h_normal: np.ndarray, variance_target: float) -> PcaModel:
    """Fit a truncated PCA basis covering ``variance_target`` of the variance.

    Uses an SVD of the mean-centered data (population 1/n convention for the
    variance shares). Retains the smallest component count whose cumulative
    explained-variance ratio reaches the target, never fewer than one. Each
    component's largest-magnitude entry is made positive for determinism.
    """
    x = np.asarray(h_normal, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("PCA requires a 2-D matrix with at least 2 rows")
    if not 0.0 < variance_target <= 1.0:
        raise ValueError("variance_target must lie in (0, 1]")
    n, dim = x.shape
    if n < dim + 1:
        logger.warning("fitting PCA on %d rows in %d dims; spectrum may be rank-deficient", n, dim)
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variances = (singular * singular) / n
    total = variances.sum()
    if total <= 0.0:
        raise ValueError("zero-variance input: all rows identical")
    ratios = variances / total
    if dim > ratios.shape[0]:  # fewer rows than dims: pad the spectrum with zeros
        ratios = np.concatenate([ratios, np.zeros(dim - ratios.shape[0])])
    cumulative = np.cumsum(ratios[: vt.shape[0]])
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = max(1, min(k, vt.shape[0]))
    components = vt[:k].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0.0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios, k=k)


def score_fre(model: PcaModel, h: np.ndarray) -> np.ndarray:
    """Squared residual of each row after projection onto the retained basis."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != model.dim:
        raise ValueError(f"expected shape (batch, {model.dim}), got {h.shape}")
    centered = h - model.mean
    projected = centered @ model.components.T
    residual = centered - projected @ model.components
    return (residual * residual).sum(axis=1)


def save_pca(model: PcaModel, path: str | Path) -> None:
    header = {"k": model.k}
    np.savez(
        path,
        mean=model.mean,
        components=model.components,
        explained_variance_ratio=model.explained_variance_ratio,
        header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
    )


def load_pca(path: str | Path) -> PcaModel:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        return PcaModel(
            mean=data["mean"],
            components=data["components"],
            explained_variance_ratio=data["explained_variance_ratio"],
            k=header["k"],
        )
