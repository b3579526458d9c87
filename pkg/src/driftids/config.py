"""Run configuration: defaults, YAML loading, and environment overrides.

The config file is YAML with one section per concern. Every key can be
overridden through the environment as ``DRIFTIDS_<SECTION>__<KEY>``, e.g.
``DRIFTIDS_TRAIN__LEARNING_RATE=0.01``.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, get_type_hints

import yaml

from .ingest import CsvSchema

ENV_PREFIX = "DRIFTIDS_"


class ConfigError(ValueError):
    """Raised when a config file or override cannot be parsed or validated."""


@dataclass
class PipelineConfig:
    # split
    num_experiences: int = 5
    test_fraction: float = 0.3
    # model
    hidden_width: int = 256
    latent_dim: int = 32
    # train
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 0.001
    lambda_recon: float = 0.1
    lambda_continual: float = 0.1
    margin: float = 2.0
    max_triplets: int = 128
    triplet_mining: str = "random"  # or "hard"
    # clustering
    k_min: int = 2
    k_max: int = 10
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    # detector
    variance_target: float = 0.95
    # eval
    threshold_mode: str = "best-f"  # "best-f" or "quantile:<q>"
    per_cell_threshold: bool = False
    # ablation
    disable_cluster_separation: bool = False
    disable_reconstruction: bool = False
    disable_continual: bool = False
    # seeds
    seed: int = 0
    # data schema
    schema: CsvSchema = field(
        default_factory=lambda: CsvSchema(label_column="label", attack_type_column="attack_type")
    )

    def validate(self) -> None:
        problems = []
        if self.num_experiences < 1:
            problems.append("num_experiences must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            problems.append("test_fraction must lie in (0, 1)")
        if self.hidden_width < 1 or self.latent_dim < 1:
            problems.append("hidden_width and latent_dim must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            problems.append("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            problems.append("learning_rate must be positive")
        if not 0.0 <= self.lambda_recon <= 1.0 or not 0.0 <= self.lambda_continual <= 1.0:
            problems.append("loss weights must lie in [0, 1]")
        if self.margin <= 0.0:
            problems.append("margin must be positive")
        if self.triplet_mining not in ("random", "hard"):
            problems.append(f"unknown triplet_mining '{self.triplet_mining}'")
        if self.k_min < 2 or self.k_max < self.k_min:
            problems.append("K range must satisfy 2 <= k_min <= k_max")
        if not 0.0 < self.variance_target <= 1.0:
            problems.append("variance_target must lie in (0, 1]")
        if self.disable_cluster_separation and self.disable_reconstruction and self.disable_continual:
            problems.append("at least one training loss must remain enabled")
        mode = self.threshold_mode
        if mode != "best-f":
            if not mode.startswith("quantile:"):
                problems.append(f"unknown threshold_mode '{mode}'")
            else:
                try:
                    q = float(mode.split(":", 1)[1])
                except ValueError:
                    q = -1.0
                if not 0.0 < q < 1.0:
                    problems.append("quantile threshold must lie in (0, 1)")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["schema"] = asdict(self.schema)
        return data


_SECTIONS: dict[str, list[str]] = {
    "split": ["num_experiences", "test_fraction"],
    "model": ["hidden_width", "latent_dim"],
    "train": [
        "epochs",
        "batch_size",
        "learning_rate",
        "lambda_recon",
        "lambda_continual",
        "margin",
        "max_triplets",
        "triplet_mining",
    ],
    "clustering": ["k_min", "k_max", "kmeans_max_iter", "kmeans_tol"],
    "detector": ["variance_target"],
    "eval": ["threshold_mode", "per_cell_threshold"],
    "ablation": ["disable_cluster_separation", "disable_reconstruction", "disable_continual"],
    "seeds": ["seed"],
}

_SCHEMA_KEYS = [f.name for f in fields(CsvSchema)]


def _coerce(value: Any, target_type: type) -> Any:
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
        raise ConfigError(f"cannot interpret {value!r} as a boolean")
    return target_type(value)


def _field_types(cls) -> dict[str, type]:
    hints = get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def apply_section_values(config: PipelineConfig, section: str, values: dict[str, Any]) -> None:
    """Set config fields from one config-file section, with type coercion."""
    types = _field_types(PipelineConfig)
    if section == "data":
        schema_types = _field_types(CsvSchema)
        for key, value in values.items():
            if key not in _SCHEMA_KEYS:
                raise ConfigError(f"unknown data key '{key}'")
            if key in ("categorical_columns", "drop_columns"):
                if not isinstance(value, list):
                    raise ConfigError(f"data.{key} must be a list")
                setattr(config.schema, key, [str(v) for v in value])
            elif key == "categorical_values":
                if not isinstance(value, dict):
                    raise ConfigError("data.categorical_values must be a mapping")
                config.schema.categorical_values = {str(k): [str(x) for x in v] for k, v in value.items()}
            else:
                setattr(config.schema, key, _coerce(value, schema_types.get(key, str)))
        return
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section '{section}'")
    for key, value in values.items():
        if key not in _SECTIONS[section]:
            raise ConfigError(f"unknown key '{key}' in section '{section}'")
        setattr(config, key, _coerce(value, types[key]))


def apply_env_overrides(config: PipelineConfig, environ: dict[str, str] | None = None) -> None:
    """Apply DRIFTIDS_<SECTION>__<KEY> environment overrides."""
    environ = os.environ if environ is None else environ
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX) :].lower().split("__", 1)
        apply_section_values(config, section, {key: raw})


def load_config(path: str | Path | None, environ: dict[str, str] | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional YAML file, and the env."""
    config = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            payload = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a mapping of sections")
        for section, values in payload.items():
            if not isinstance(values, dict):
                raise ConfigError(f"section '{section}' must be a mapping")
            apply_section_values(config, str(section), values)
    apply_env_overrides(config, environ)
    config.validate()
    return config


def synthetic_profile(seed: int = 2) -> PipelineConfig:
    """Desk-scale profile matched to the stock drift fixture."""
    config = PipelineConfig(
        num_experiences=3,
        hidden_width=64,
        latent_dim=6,
        epochs=10,
        batch_size=128,
        triplet_mining="hard",
        k_min=2,
        k_max=6,
        seed=seed,
    )
    config.validate()
    return config
