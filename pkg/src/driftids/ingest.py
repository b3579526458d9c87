"""CSV ingestion, schema validation, and feature standardization.

Datasets are labeled flow-record tables: one label column (normal vs attack),
one attack-type column, and numeric feature columns. Categorical feature
columns must be declared in the schema and are one-hot encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

# Reserved attack-type category carried by benign rows after ingestion.
NORMAL_CATEGORY = "normal"

# Floor applied to per-feature stddev so constant columns do not divide by zero.
STD_FLOOR = 1e-8


@dataclass
class CsvSchema:
    """Column-role mapping for a flow-record CSV."""

    label_column: str
    attack_type_column: str
    normal_token: str = "normal"
    label_normal: str = "0"
    label_attack: str = "1"
    categorical_columns: list[str] = field(default_factory=list)
    # Optional explicit category lists per categorical column. Unknown values
    # then encode as all-zeros instead of growing the feature space.
    categorical_values: dict[str, list[str]] = field(default_factory=dict)
    drop_columns: list[str] = field(default_factory=list)
    delimiter: str = ","


@dataclass
class IngestReport:
    """What happened while loading a CSV."""

    rows_read: int
    rows_dropped: int
    n_features: int

    def lines(self) -> list[str]:
        return [
            f"rows read: {self.rows_read}",
            f"rows dropped: {self.rows_dropped}",
            f"features after encoding: {self.n_features}",
        ]


@dataclass
class RawDataset:
    """Uniform in-memory dataset: features + binary labels + attack types."""

    features: np.ndarray  # (n_rows, n_features) float64, all finite
    labels: np.ndarray  # (n_rows,) int64, 0 normal / 1 attack
    attack_types: np.ndarray  # (n_rows,) str, NORMAL_CATEGORY on benign rows
    feature_names: list[str]

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.attack_types = np.asarray(self.attack_types, dtype=object)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def attack_classes(self) -> list[str]:
        """Distinct attack categories, sorted, excluding the normal category."""
        return sorted(set(self.attack_types[self.labels == 1]))

    def validate(self) -> None:
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = self.features.shape[0]
        if n == 0 or self.features.shape[1] == 0:
            raise ValueError("dataset must have at least one row and one feature")
        if self.labels.shape != (n,) or self.attack_types.shape != (n,):
            raise ValueError("labels/attack_types length must match feature rows")
        if not np.isfinite(self.features).all():
            raise ValueError("features contain NaN or Inf after ingestion")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        is_normal_type = self.attack_types == NORMAL_CATEGORY
        if not ((self.labels == 0) == is_normal_type).all():
            raise ValueError(
                "label/attack-type mismatch: label 0 rows must carry the "
                f"'{NORMAL_CATEGORY}' category and attack rows must not"
            )


def load_csv(path: str | Path, schema: CsvSchema) -> tuple[RawDataset, IngestReport]:
    """Load and validate a labeled flow CSV under the given column schema.

    Rows with missing or non-finite values in any mapped column are dropped
    and counted. Categorical columns are one-hot encoded; any other
    non-numeric feature column is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    # round_trip float parsing keeps ingestion bit-deterministic.
    frame = pd.read_csv(
        path, delimiter=schema.delimiter, skipinitialspace=True, float_precision="round_trip"
    )
    rows_read = len(frame)

    required = [schema.label_column, schema.attack_type_column]
    missing_cols = [c for c in required + list(schema.categorical_columns) if c not in frame.columns]
    if missing_cols:
        raise ValueError(f"schema names columns absent from CSV: {missing_cols}")

    frame = frame.drop(columns=[c for c in schema.drop_columns if c in frame.columns])
    feature_cols = [c for c in frame.columns if c not in (schema.label_column, schema.attack_type_column)]
    if not feature_cols:
        raise ValueError("no feature columns remain after applying the schema")

    numeric_cols = [c for c in feature_cols if c not in schema.categorical_columns]
    for col in numeric_cols:
        original_missing = frame[col].isna()
        coerced = pd.to_numeric(frame[col], errors="coerce")
        if (coerced.isna() & ~original_missing).any():
            raise ValueError(
                f"feature column '{col}' is non-numeric; declare it in "
                "categorical_columns or add it to drop_columns"
            )
        frame[col] = coerced

    # Drop rows with missing values in any mapped column, then rows with
    # non-finite numeric features. Both count as dropped.
    mapped = [schema.label_column, schema.attack_type_column] + feature_cols
    keep = ~frame[mapped].isna().any(axis=1)
    if numeric_cols:
        keep &= np.isfinite(frame[numeric_cols].to_numpy(dtype=np.float64)).all(axis=1)
    rows_dropped = int((~keep).sum())
    frame = frame.loc[keep]
    if len(frame) == 0:
        raise ValueError("zero rows remain after cleaning")

    label_tokens = frame[schema.label_column].astype(str).str.strip()
    unexpected = sorted(set(label_tokens) - {schema.label_normal, schema.label_attack})
    if unexpected:
        raise ValueError(
            f"label column '{schema.label_column}' contains tokens {unexpected}; "
            f"expected only '{schema.label_normal}' or '{schema.label_attack}'"
        )
    labels = (label_tokens == schema.label_attack).to_numpy().astype(np.int64)

    type_tokens = frame[schema.attack_type_column].astype(str).str.strip()
    attack_types = np.where(type_tokens == schema.normal_token, NORMAL_CATEGORY, type_tokens)
    mismatch = (labels == 0) != (attack_types == NORMAL_CATEGORY)
    if mismatch.any():
        idx = int(np.argmax(mismatch))
        raise ValueError(
            f"row {frame.index[idx]}: label and attack type disagree "
            f"(label={labels[idx]}, type='{type_tokens.iloc[idx]}')"
        )

    blocks: list[np.ndarray] = []
    names: list[str] = []
    if numeric_cols:
        blocks.append(frame[numeric_cols].to_numpy(dtype=np.float64))
        names.extend(numeric_cols)
    for col in schema.categorical_columns:
        values = frame[col].astype(str).str.strip()
        categories = schema.categorical_values.get(col) or sorted(values.unique())
        onehot = np.zeros((len(frame), len(categories)), dtype=np.float64)
        for j, cat in enumerate(categories):
            onehot[:, j] = (values == cat).to_numpy()
        blocks.append(onehot)  # unknown categories stay all-zero
        names.extend(f"{col}={cat}" for cat in categories)

    dataset = RawDataset(
        features=np.hstack(blocks),
        labels=labels,
        attack_types=attack_types,
        feature_names=names,
    )
    dataset.validate()
    return dataset, IngestReport(rows_read, rows_dropped, dataset.n_features)


@dataclass
class Standardizer:
    """Per-feature affine transform: subtract mean, divide by floored stddev."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        if (self.std < STD_FLOOR).any():
            raise ValueError(f"stddev entries must be >= {STD_FLOOR}")


def fit_standardizer(data: np.ndarray) -> Standardizer:
    """Fit column means and population stddevs (ddof=0), floored at STD_FLOOR."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("standardizer requires a 2-D matrix with at least 2 rows")
    mean = data.mean(axis=0)
    std = np.maximum(data.std(axis=0, ddof=0), STD_FLOOR)
    return Standardizer(mean=mean, std=std)


def apply_standardizer(s: Standardizer, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != s.mean.shape[0]:
        raise ValueError(
            f"column count mismatch: data has {data.shape[-1]}, standardizer has {s.mean.shape[0]}"
        )
    return (data - s.mean) / s.std


def invert_standardizer(s: Standardizer, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.shape[-1] != s.mean.shape[0]:
        raise ValueError(
            f"column count mismatch: data has {data.shape[-1]}, standardizer has {s.mean.shape[0]}"
        )
    return data * s.std + s.mean
