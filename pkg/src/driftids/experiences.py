"""Stream preparation: clean-normal holdout plus attack-disjoint experiences.

10% of the normal rows are set aside as a clean holdout. The remaining rows
are partitioned into ``m`` experiences, each owning a near-equal share of the
normal data and a disjoint group of attack classes, then split into an
unlabeled train pool and a labeled test set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import RawDataset

CLEAN_NORMAL_FRACTION = 0.10

# Sub-stream tags mixed into the seed so each stage draws independently.
_HOLDOUT_STREAM = 0
_CLASS_STREAM = 1
_SPLIT_STREAM = 2


@dataclass(frozen=True)
class Experience:
    """One segment of the stream: unlabeled train pool + labeled test set."""

    index: int
    train_features: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    attack_classes: tuple[str, ...]
    # Row indices into the source dataset; persisted in the split manifest.
    train_indices: np.ndarray
    test_indices: np.ndarray
    degenerate: bool  # test split is missing one of the two label classes


@dataclass(frozen=True)
class ExperienceSet:
    clean_normal: np.ndarray
    clean_normal_indices: np.ndarray
    experiences: tuple[Experience, ...]
    num_experiences: int
    rng_seed: int

    def all_row_indices(self) -> np.ndarray:
        """Every source row index used by the split (holdout + experiences)."""
        parts = [self.clean_normal_indices]
        for exp in self.experiences:
            parts.extend([exp.train_indices, exp.test_indices])
        return np.concatenate(parts)


def class_assignment(classes: list[str], m: int, seed: int) -> list[list[str]]:
    """Partition attack classes into m disjoint groups of near-equal size.

    The classes are shuffled under the seed and chunked in order, so group
    sizes differ by at most one and the assignment is reproducible.
    """
    if m <= 0:
        raise ValueError("number of experiences must be positive")
    if len(classes) < m:
        raise ValueError(f"need at least {m} attack classes, got {len(classes)}")
    rng = np.random.default_rng([seed, _CLASS_STREAM])
    order = [classes[i] for i in rng.permutation(len(classes))]
    base, extra = divmod(len(classes), m)
    groups: list[list[str]] = []
    start = 0
    for g in range(m):
        size = base + (1 if g < extra else 0)
        groups.append(order[start : start + size])
        start += size
    return groups


def _stratified_split(
    indices: np.ndarray, labels: np.ndarray, test_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into train/test keeping both label classes in test.

    Per label class: a class with one row contributes it to train only
    (the caller flags the experience degenerate); otherwise the test share is
    round(fraction * n) clipped to [1, n - 1].
    """
    train_parts, test_parts = [], []
    for value in (0, 1):
        rows = indices[labels == value]
        if rows.size == 0:
            continue
        rows = rows[rng.permutation(rows.size)]
        if rows.size == 1:
            train_parts.append(rows)
            continue
        n_test = int(np.clip(round(test_fraction * rows.size), 1, rows.size - 1))
        test_parts.append(rows[:n_test])
        train_parts.append(rows[n_test:])
    train = np.concatenate(train_parts) if train_parts else np.empty(0, dtype=np.int64)
    test = np.concatenate(test_parts) if test_parts else np.empty(0, dtype=np.int64)
    # Shuffle so train order does not leak the per-class grouping.
    return train[rng.permutation(train.size)], test[rng.permutation(test.size)]


def split(data: RawDataset, m: int, test_fraction: float, seed: int) -> ExperienceSet:
    """Carve out the clean-normal holdout and build m experiences."""
    if m < 1:
        raise ValueError("number of experiences must be >= 1")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    data.validate()
    classes = data.attack_classes()
    if len(classes) < m:
        raise ValueError(f"dataset has {len(classes)} attack classes, fewer than m={m}")

    normal_rows = np.flatnonzero(data.labels == 0)
    n_holdout = int(round(CLEAN_NORMAL_FRACTION * normal_rows.size))
    if n_holdout < 1:
        raise ValueError(
            f"{normal_rows.size} normal rows are too few for the "
            f"{CLEAN_NORMAL_FRACTION:.0%} clean holdout"
        )

    holdout_rng = np.random.default_rng([seed, _HOLDOUT_STREAM])
    normal_order = normal_rows[holdout_rng.permutation(normal_rows.size)]
    holdout_idx = np.sort(normal_order[:n_holdout])
    remaining_normals = normal_order[n_holdout:]

    # Near-equal normal shares; remainder rows go to the earliest experiences.
    base, extra = divmod(remaining_normals.size, m)
    normal_groups = []
    start = 0
    for g in range(m):
        size = base + (1 if g < extra else 0)
        normal_groups.append(remaining_normals[start : start + size])
        start += size

    class_groups = class_assignment(classes, m, seed)

    experiences = []
    for i in range(m):
        group = class_groups[i]
        attack_idx = np.flatnonzero(np.isin(data.attack_types, group) & (data.labels == 1))
        if attack_idx.size == 0:
            raise ValueError(f"attack classes {group} have zero rows")
        rows = np.concatenate([normal_groups[i], attack_idx])
        rng = np.random.default_rng([seed, _SPLIT_STREAM, i])
        train_idx, test_idx = _stratified_split(rows, data.labels[rows], test_fraction, rng)
        test_labels = data.labels[test_idx]
        degenerate = not (np.any(test_labels == 0) and np.any(test_labels == 1))
        experiences.append(
            Experience(
                index=i,
                train_features=data.features[train_idx],
                test_features=data.features[test_idx],
                test_labels=test_labels,
                attack_classes=tuple(group),
                train_indices=train_idx,
                test_indices=test_idx,
                degenerate=degenerate,
            )
        )

    return ExperienceSet(
        clean_normal=data.features[holdout_idx],
        clean_normal_indices=holdout_idx,
        experiences=tuple(experiences),
        num_experiences=m,
        rng_seed=seed,
    )


def write_split_manifest(exp_set: ExperienceSet, path: str | Path) -> None:
    """Persist row indices per partition so the split can be re-materialized."""
    payload = {
        "seed": exp_set.rng_seed,
        "num_experiences": exp_set.num_experiences,
        "clean_normal_indices": exp_set.clean_normal_indices.tolist(),
        "experiences": [
            {
                "index": exp.index,
                "attack_classes": list(exp.attack_classes),
                "train_indices": exp.train_indices.tolist(),
                "test_indices": exp.test_indices.tolist(),
                "degenerate": exp.degenerate,
            }
            for exp in exp_set.experiences
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def rematerialize(data: RawDataset, path: str | Path) -> ExperienceSet:
    """Rebuild an ExperienceSet from a persisted split manifest."""
    payload = json.loads(Path(path).read_text())
    experiences = []
    for entry in payload["experiences"]:
        train_idx = np.asarray(entry["train_indices"], dtype=np.int64)
        test_idx = np.asarray(entry["test_indices"], dtype=np.int64)
        experiences.append(
            Experience(
                index=entry["index"],
                train_features=data.features[train_idx],
                test_features=data.features[test_idx],
                test_labels=data.labels[test_idx],
                attack_classes=tuple(entry["attack_classes"]),
                train_indices=train_idx,
                test_indices=test_idx,
                degenerate=entry["degenerate"],
            )
        )
    holdout_idx = np.asarray(payload["clean_normal_indices"], dtype=np.int64)
    return ExperienceSet(
        clean_normal=data.features[holdout_idx],
        clean_normal_indices=holdout_idx,
        experiences=tuple(experiences),
        num_experiences=payload["num_experiences"],
        rng_seed=payload["seed"],
    )
