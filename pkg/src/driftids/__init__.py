"""Continual novelty detection for network intrusion data streams.

The package trains an autoencoder feature extractor continually over a
sequence of experiences (each introducing new attack classes) and scores
samples by their reconstruction residual against a principal subspace fitted
on clean normal data. No attack labels are used for training.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config, synthetic_profile
from .experiences import Experience, ExperienceSet, split
from .ingest import CsvSchema, RawDataset, load_csv
from .metrics import ClSummary, ResultsMatrix
from .pipeline import RunResult, baseline_pca_run, run
from .synth import AttackCluster, SynthSpec, default_drift_spec, generate

__all__ = [
    "AttackCluster",
    "ClSummary",
    "CsvSchema",
    "Experience",
    "ExperienceSet",
    "PipelineConfig",
    "RawDataset",
    "ResultsMatrix",
    "RunResult",
    "SynthSpec",
    "baseline_pca_run",
    "default_drift_spec",
    "generate",
    "load_config",
    "load_csv",
    "run",
    "split",
    "synthetic_profile",
    "__version__",
]
