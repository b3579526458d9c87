"""Synthetic drifting-stream generator for desk-scale experiments.

Normal traffic is a Gaussian cloud; each attack is a Gaussian cluster pushed
away from the origin along a seeded random direction, tagged with the
experience in which it is meant to appear. Offsets are expressed in units of
the average normal standard deviation.

Normal data can optionally carry low-rank correlation structure
(``normal_rank``): subspace detectors only discriminate when the normal
cloud concentrates near a subspace, so the shipped drift fixture enables it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import NORMAL_CATEGORY, RawDataset


@dataclass(frozen=True)
class AttackCluster:
    name: str
    offset: float  # center distance from origin, in average-normal-stddev units
    scale: float  # covariance scale relative to the normal cloud
    rows: int
    experience: int
    # Share of the squared offset lying inside the normal factor subspace.
    # None draws a fully random direction. In-subspace displacement is hard
    # for a detector fitted on raw features but separable after encoding.
    subspace_fraction: float | None = None

    def __post_init__(self) -> None:
        if self.offset < 0.0:
            raise ValueError("offset must be non-negative")
        if self.rows < 1:
            raise ValueError("each attack cluster needs at least one row")
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.subspace_fraction is not None and not 0.0 <= self.subspace_fraction <= 1.0:
            raise ValueError("subspace_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SynthSpec:
    dims: int
    n_normal: int
    attacks: tuple[AttackCluster, ...]
    seed: int
    normal_rank: int | None = None  # None: isotropic standard Gaussian
    normal_noise: float = 0.1  # off-subspace noise floor when normal_rank is set

    def __post_init__(self) -> None:
        if self.dims < 1 or self.n_normal < 2:
            raise ValueError("need dims >= 1 and at least 2 normal rows")
        if self.normal_rank is not None and not 1 <= self.normal_rank <= self.dims:
            raise ValueError("normal_rank must lie in [1, dims]")
        experiences = sorted({a.experience for a in self.attacks})
        if experiences != list(range(len(experiences))):
            raise ValueError("attack experience indices must be contiguous from 0")
        if self.normal_rank is None and any(a.subspace_fraction is not None for a in self.attacks):
            raise ValueError("subspace_fraction requires normal_rank (isotropic normals have no subspace)")

    @property
    def num_experiences(self) -> int:
        return max(a.experience for a in self.attacks) + 1 if self.attacks else 0


def _normal_basis(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray | None:
    """Scaled orthonormal factor basis (dims x rank), or None for isotropic.

    Factor scales are normalized so the average per-coordinate variance is 1,
    keeping attack offsets honest in sigma units.
    """
    if spec.normal_rank is None:
        return None
    raw = rng.standard_normal((spec.dims, spec.normal_rank))
    q, _ = np.linalg.qr(raw)
    signal = spec.dims * (1.0 - spec.normal_noise**2)
    return q * np.sqrt(signal / spec.normal_rank)


def _sample_cloud(
    n: int, dims: int, basis: np.ndarray | None, noise: float, rng: np.random.Generator
) -> np.ndarray:
    if basis is None:
        return rng.standard_normal((n, dims))
    factors = rng.standard_normal((n, basis.shape[1]))
    return factors @ basis.T + noise * rng.standard_normal((n, dims))


def generate(spec: SynthSpec) -> tuple[RawDataset, dict[str, int]]:
    """Materialize the spec into a dataset plus the class-to-experience map."""
    rng = np.random.default_rng(spec.seed)
    basis = _normal_basis(spec, rng)
    blocks = [_sample_cloud(spec.n_normal, spec.dims, basis, spec.normal_noise, rng)]
    labels = [np.zeros(spec.n_normal, dtype=np.int64)]
    types = [np.full(spec.n_normal, NORMAL_CATEGORY, dtype=object)]

    assignment: dict[str, int] = {}
    for cluster in spec.attacks:
        direction = _attack_direction(spec.dims, basis, cluster.subspace_fraction, rng)
        center = cluster.offset * direction
        points = center + cluster.scale * _sample_cloud(
            cluster.rows, spec.dims, basis, spec.normal_noise, rng
        )
        _check_sample_mean(points, center, cluster)
        blocks.append(points)
        labels.append(np.ones(cluster.rows, dtype=np.int64))
        types.append(np.full(cluster.rows, cluster.name, dtype=object))
        assignment[cluster.name] = cluster.experience

    dataset = RawDataset(
        features=np.vstack(blocks),
        labels=np.concatenate(labels),
        attack_types=np.concatenate(types),
        feature_names=[f"f{i}" for i in range(spec.dims)],
    )
    dataset.validate()
    return dataset, assignment


def _attack_direction(
    dims: int,
    basis: np.ndarray | None,
    subspace_fraction: float | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Unit displacement direction, optionally split across the factor subspace."""
    raw = rng.standard_normal(dims)
    if subspace_fraction is None or basis is None:
        return raw / np.linalg.norm(raw)
    q, _ = np.linalg.qr(basis)  # orthonormal factor subspace
    inside = q @ (q.T @ raw)
    outside = raw - inside
    # Degenerate draws (exactly in/out of the subspace) cannot be split.
    if np.linalg.norm(inside) < 1e-12 or np.linalg.norm(outside) < 1e-12:
        raise ValueError("random direction degenerated; pick another seed")
    inside /= np.linalg.norm(inside)
    outside /= np.linalg.norm(outside)
    direction = np.sqrt(subspace_fraction) * inside + np.sqrt(1.0 - subspace_fraction) * outside
    return direction / np.linalg.norm(direction)


def _check_sample_mean(points: np.ndarray, center: np.ndarray, cluster: AttackCluster) -> None:
    # 4-sigma-style sanity bound on the sample mean, scaled to the cluster's
    # dimensionality and spread.
    error = float(np.linalg.norm(points.mean(axis=0) - center))
    bound = 4.0 * cluster.scale * np.sqrt(points.shape[1] / points.shape[0])
    if error > bound:
        raise AssertionError(
            f"cluster '{cluster.name}' sample mean drifted {error:.4f} from its "
            f"center (bound {bound:.4f}); suspicious RNG or spec"
        )


def write_csv(dataset: RawDataset, path: str | Path) -> None:
    """Emit the dataset in the same schema the CSV ingester consumes."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + ["label", "attack_type"])
        for row, label, attack_type in zip(dataset.features, dataset.labels, dataset.attack_types):
            # repr(float) is the shortest exact round-trip form.
            writer.writerow([repr(float(v)) for v in row] + [int(label), attack_type])


def default_drift_spec(seed: int = 23) -> SynthSpec:
    """The stock drift fixture: 8 dims, 3 experiences, attacks at 6-8 sigma.

    Normal data concentrates near a rank-6 subspace. Each experience brings
    one cluster displaced in a random direction (visible to any subspace
    detector) and one displaced entirely inside the normal subspace, which a
    detector fitted on raw features misses by construction but learned
    features can separate.
    """
    clusters = [
        ("attack_a", 6.0, None, 0),
        ("attack_b", 8.0, 1.0, 0),
        ("attack_c", 6.5, None, 1),
        ("attack_d", 7.5, 1.0, 1),
        ("attack_e", 7.0, None, 2),
        ("attack_f", 8.0, 1.0, 2),
    ]
    attacks = tuple(
        AttackCluster(
            name=name,
            offset=offset,
            scale=1.0,
            rows=250,
            experience=experience,
            subspace_fraction=fraction,
        )
        for name, offset, fraction, experience in clusters
    )
    return SynthSpec(
        dims=8,
        n_normal=1600,
        attacks=attacks,
        seed=seed,
        normal_rank=6,
        normal_noise=0.3,
    )
