"""K-Means clustering, elbow-based model selection, and pseudo-labeling.

The pseudo-labeling step marks unlabeled training rows as normal-like (0)
when their cluster captures at least one clean-normal holdout point, and
anomalous-like (1) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KMeansModel:
    centroids: np.ndarray  # (K, dim)
    k: int
    inertia: float  # sum of squared distances to assigned centroids
    iterations_run: int


@dataclass(frozen=True)
class PseudoLabels:
    labels: np.ndarray  # (n,) int, 0 normal-like / 1 anomalous-like
    normal_cluster_ids: frozenset[int]


def _squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, (n, K), clamped at zero."""
    sq = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ centroids.T) + (centroids * centroids).sum(axis=1)[None, :]
    return np.maximum(sq, 0.0)


def assign_clusters(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest-centroid index per row."""
    return np.argmin(_squared_distances(x, centroids), axis=1)


def _exact_inertia(x: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    diff = x - centroids[assignment]
    return float((diff * diff).sum())


def _kmeanspp_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ D^2 seeding."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    closest = _squared_distances(x, centroids[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # All remaining points coincide with a centroid; any choice works.
            centroids[j] = x[rng.integers(n)]
            continue
        probs = closest / total
        centroids[j] = x[rng.choice(n, p=probs)]
        closest = np.minimum(closest, _squared_distances(x, centroids[j : j + 1]).ravel())
    return centroids


def fit_kmeans(
    data: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
    n_init: int = 5,
) -> KMeansModel:
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` restarts.

    Each restart stops when the largest centroid shift falls below ``tol``
    or after ``max_iter`` iterations; the lowest-inertia fit wins. An emptied
    cluster is reseeded to the point farthest from its assigned centroid.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("data must be a 2-D matrix")
    if not np.isfinite(x).all():
        raise ValueError("data must be finite")
    n = x.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"K must lie in [1, {n}], got {k}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")

    rng = np.random.default_rng(seed)
    best: KMeansModel | None = None
    for _ in range(n_init):
        model = _lloyd_once(x, k, rng, max_iter, tol)
        if best is None or model.inertia < best.inertia:
            best = model
    return best


def _lloyd_once(
    x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int, tol: float
) -> KMeansModel:
    centroids = _kmeanspp_seeds(x, k, rng)
    assignment = assign_clusters(x, centroids)
    prev_inertia = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        reseeded = False
        new_centroids = np.empty_like(centroids)
        for j in range(k):
            members = x[assignment == j]
            if members.shape[0] == 0:
                dist = ((x - centroids[assignment]) ** 2).sum(axis=1)
                new_centroids[j] = x[int(np.argmax(dist))]
                reseeded = True
            else:
                new_centroids[j] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        assignment = assign_clusters(x, centroids)
        if __debug__:
            inertia = _exact_inertia(x, centroids, assignment)
            # Lloyd steps never increase inertia; a reseed may transiently.
            assert reseeded or inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, (
                f"inertia increased without a reseed: {prev_inertia} -> {inertia}"
            )
            prev_inertia = inertia
        if shift < tol:
            break
    return KMeansModel(
        centroids=centroids,
        k=k,
        inertia=_exact_inertia(x, centroids, assignment),
        iterations_run=iterations,
    )


def select_k_elbow(data: np.ndarray, k_min: int, k_max: int, seed: int) -> tuple[int, dict[int, float]]:
    """Pick K by the elbow of the inertia curve.

    Fits K-Means for every K in [k_min, k_max] and returns the interior K
    maximizing the discrete second difference of inertia (ties toward smaller
    K), plus the inertia curve for diagnostics. Ranges narrower than three
    values fall back to the smallest K.
    """
    x = np.asarray(data, dtype=np.float64)
    if k_min > k_max:
        raise ValueError(f"empty K range [{k_min}, {k_max}]")
    if k_min < 1 or k_max > x.shape[0]:
        raise ValueError(f"K range [{k_min}, {k_max}] outside [1, {x.shape[0]}]")
    ks = list(range(k_min, k_max + 1))
    # Per-K sub-seed so the fits are independent and order-insensitive.
    inertia = {k: fit_kmeans(x, k, seed=_sub_seed(seed, k)).inertia for k in ks}
    if len(ks) < 3:
        return ks[0], inertia
    best_k, best_curv = ks[1], -np.inf
    for k in ks[1:-1]:
        curv = inertia[k - 1] - 2.0 * inertia[k] + inertia[k + 1]
        if curv > best_curv:
            best_k, best_curv = k, curv
    return best_k, inertia


def _sub_seed(seed: int, k: int) -> int:
    """Deterministic per-K seed derived from the base seed."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def assign_pseudo_labels(model: KMeansModel, x_train: np.ndarray, n_c: np.ndarray) -> PseudoLabels:
    """Label train rows 0 when their cluster contains a clean-normal point.

    Clean-normal rows are placed by nearest-centroid assignment (they were
    not part of the fit); every cluster that captures at least one of them
    forms the normal-cluster set.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    n_c = np.asarray(n_c, dtype=np.float64)
    if n_c.shape[0] == 0:
        raise ValueError("clean-normal set is empty; pseudo-labeling requires it")
    dim = model.centroids.shape[1]
    if x_train.shape[1] != dim or n_c.shape[1] != dim:
        raise ValueError(
            f"dimension mismatch: centroids have {dim} columns, "
            f"x_train {x_train.shape[1]}, clean normal {n_c.shape[1]}"
        )
    normal_clusters = frozenset(int(c) for c in np.unique(assign_clusters(n_c, model.centroids)))
    train_clusters = assign_clusters(x_train, model.centroids)
    labels = np.where(np.isin(train_clusters, list(normal_clusters)), 0, 1).astype(np.int64)
    return PseudoLabels(labels=labels, normal_cluster_ids=normal_clusters)
