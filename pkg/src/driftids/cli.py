"""Command-line entry point: run experiments, ablations, and baselines.

Artifacts land in the output directory: ``manifest.json`` (written before
training starts), ``results.csv`` / ``pr_auc.csv`` / ``thresholds.csv``,
``long.csv`` (plot-ready long format), ``summary.json`` + ``summary.txt``,
``train_log.csv``, ``split_manifest.json``, per-experience model and
detector checkpoints, and ``timing.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import autoencoder as ae
from .config import ConfigError, PipelineConfig, load_config, synthetic_profile
from .experiences import write_split_manifest
from .ingest import load_csv
from .metrics import ClSummary
from .pca import save_pca
from .pipeline import PipelineError, RunResult, baseline_pca_run, run
from .synth import AttackCluster, SynthSpec, default_drift_spec, generate, write_csv

EXIT_OK = 0
EXIT_PIPELINE = 1
EXIT_CONFIG = 2

ABLATION_VARIANTS = [
    ("full", {}),
    ("no_cluster_separation", {"disable_cluster_separation": True}),
    ("no_reconstruction", {"disable_reconstruction": True}),
    ("no_reconstruction_no_continual", {"disable_reconstruction": True, "disable_continual": True}),
]


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _format_cell(value: float) -> str:
    return "" if np.isnan(value) else repr(float(value))


def _write_matrix_csv(path: Path, matrix: np.ndarray, mask: np.ndarray) -> None:
    m = matrix.shape[0]
    lines = ["train," + ",".join(f"test_{j}" for j in range(m))]
    for i in range(m):
        cells = [_format_cell(matrix[i, j]) if not mask[i, j] else "" for j in range(m)]
        lines.append(f"train_{i}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_long_csv(path: Path, result: RunResult) -> None:
    lines = ["metric,train_experience,test_experience,value"]
    names = [("f1", result.results.f1), ("pr_auc", result.results.pr_auc)]
    for name, matrix in names:
        for i in range(result.results.m):
            for j in range(result.results.m):
                if not result.results.mask[i, j]:
                    lines.append(f"{name},{i},{j},{_format_cell(matrix[i, j])}")
    path.write_text("\n".join(lines) + "\n")


def _summary_dict(summary: ClSummary) -> dict:
    return {
        "avg_f1": summary.avg_f1,
        "fwd_trans": summary.fwd_trans,
        "bwd_trans": summary.bwd_trans,
        "bwd_trans_mean": summary.bwd_trans_mean,
        "has_masked_cells": summary.has_masked,
    }


def _summary_table(summary: ClSummary) -> str:
    def fmt(v: float | None) -> str:
        return "   n/a" if v is None else f"{v:6.4f}"

    return "\n".join(
        [
            "metric      value",
            f"AVG F1      {fmt(summary.avg_f1)}",
            f"FwdTrans    {fmt(summary.fwd_trans)}",
            f"BwdTrans    {fmt(summary.bwd_trans)}",
            f"BwdTrans*   {fmt(summary.bwd_trans_mean)}  (* mean over past cells)",
        ]
    )


def _write_artifacts(out: Path, result: RunResult, with_train_log: bool = True) -> None:
    res = result.results
    _write_matrix_csv(out / "results.csv", res.f1, res.mask)
    _write_matrix_csv(out / "pr_auc.csv", res.pr_auc, res.mask)
    _write_matrix_csv(out / "thresholds.csv", res.thresholds, res.mask)
    _write_long_csv(out / "long.csv", result)
    (out / "summary.json").write_text(json.dumps(_summary_dict(result.summary), indent=2) + "\n")
    (out / "summary.txt").write_text(_summary_table(result.summary) + "\n")
    if with_train_log and result.train_log:
        columns = list(result.train_log[0].keys())
        lines = [",".join(columns)]
        for row in result.train_log:
            lines.append(",".join(str(row[c]) for c in columns))
        (out / "train_log.csv").write_text("\n".join(lines) + "\n")
    timing = {
        "seconds_total": result.seconds_total,
        "test_rows_scored": result.test_rows_scored,
        "score_seconds": result.score_seconds,
        "ms_per_test_row": (
            1000.0 * result.score_seconds / result.test_rows_scored if result.test_rows_scored else None
        ),
        "per_experience": [
            {"experience": d.index, **d.phase_seconds} for d in result.diagnostics
        ],
    }
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n")
    diagnostics = [
        {
            "experience": d.index,
            "k_chosen": d.k_chosen,
            "inertia_curve": {str(k): v for k, v in d.inertia_curve.items()},
            "normal_cluster_count": d.normal_cluster_count,
            "pseudo_label_attack_fraction": d.pseudo_label_attack_fraction,
            "pca_components": d.pca_components,
        }
        for d in result.diagnostics
    ]
    (out / "diagnostics.json").write_text(json.dumps(diagnostics, indent=2) + "\n")


def _write_checkpoints(out: Path, result: RunResult) -> None:
    state = result.state
    write_split_manifest(state.experiences, out / "split_manifest.json")
    for snap in state.snapshots:
        params = ae.MlpParams(
            encoder_weights=[w.copy() for w in snap.weights],
            encoder_biases=[b.copy() for b in snap.biases],
            decoder_weights=[],
            decoder_biases=[],
            encoder_dims=snap.encoder_dims,
            activation=snap.activation,
        )
        ae.save_checkpoint(out / f"model_exp{snap.experience_index}.npz", params)
    if state.params is not None:
        ae.save_checkpoint(out / "model_final.npz", state.params, state.adam)
    for i, pca in enumerate(result.pca_models):
        save_pca(pca, out / f"pca_exp{i}.npz")


def _parse_synth_spec(value: str) -> SynthSpec:
    if value == "default":
        return default_drift_spec()
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"synthetic spec '{value}' is neither 'default' nor an existing file")
    payload = yaml.safe_load(path.read_text())
    if not isinstance(payload, dict):
        raise ConfigError("synthetic spec file must hold a mapping")
    try:
        attacks = tuple(AttackCluster(**a) for a in payload.pop("attacks", []))
        return SynthSpec(attacks=attacks, **payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from exc


def _prepare_out_dir(out: Path, force: bool) -> None:
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output directory {out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftids",
        description="Continual novelty detection experiments on flow-record datasets.",
    )
    parser.add_argument("--config", type=Path, help="YAML config file")
    parser.add_argument("--dataset", type=Path, help="labeled flow CSV to ingest")
    parser.add_argument(
        "--synthetic",
        metavar="SPEC",
        help="'default' or a YAML synthetic-stream spec; replaces --dataset",
    )
    parser.add_argument("--out", type=Path, required=True, help="artifact directory")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--force", action="store_true", help="overwrite a non-empty --out")
    parser.add_argument("--ablate", action="store_true", help="run the four loss-ablation variants")
    parser.add_argument("--baseline", action="store_true", help="plain subspace detector, no training")
    parser.add_argument(
        "--threshold-mode",
        metavar="{best-f,quantile:<q>}",
        help="threshold selection mode override",
    )
    return parser


def _load_effective_config(args: argparse.Namespace) -> PipelineConfig:
    if args.config is not None:
        config = load_config(args.config)
    elif args.synthetic is not None:
        config = synthetic_profile()
    else:
        config = load_config(None)
    if args.seed is not None:
        config.seed = args.seed
    if args.threshold_mode is not None:
        config.threshold_mode = args.threshold_mode
    config.validate()
    return config


def _resolve_dataset(args: argparse.Namespace, config: PipelineConfig, out: Path):
    """Returns (dataset, dataset_path, synth_assignment, ingest_report)."""
    if (args.dataset is None) == (args.synthetic is None):
        raise ConfigError("exactly one of --dataset or --synthetic is required")
    if args.synthetic is not None:
        spec = _parse_synth_spec(args.synthetic)
        dataset, assignment = generate(spec)
        csv_path = out / "dataset.csv"
        write_csv(dataset, csv_path)
        if spec.num_experiences and args.config is None:
            config.num_experiences = spec.num_experiences
        # Re-ingest the emitted CSV so the file path is exercised end to end.
        dataset, report = load_csv(csv_path, config.schema)
        return dataset, csv_path, assignment, report
    dataset, report = load_csv(args.dataset, config.schema)
    return dataset, args.dataset, None, report


def _write_manifest(out: Path, config: PipelineConfig, dataset_path: Path, extra: dict) -> None:
    manifest = {
        "tool": "driftids",
        "version": __version__,
        "created_unix": time.time(),
        "dataset_path": str(dataset_path),
        "dataset_sha256": _sha256(Path(dataset_path)),
        "config": config.to_dict(),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _run_single(config: PipelineConfig, dataset, out: Path, baseline: bool) -> RunResult:
    result = baseline_pca_run(config, dataset) if baseline else run(config, dataset)
    _write_artifacts(out, result, with_train_log=not baseline)
    if not baseline:
        _write_checkpoints(out, result)
    return result


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_effective_config(args)
        _prepare_out_dir(args.out, args.force)
        dataset, dataset_path, assignment, report = _resolve_dataset(args, config, args.out)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for line in report.lines():
        print(f"ingest: {line}")

    extra = {"mode": "baseline" if args.baseline else ("ablation" if args.ablate else "run")}
    if assignment is not None:
        extra["synthetic_class_experiences"] = assignment
    _write_manifest(args.out, config, dataset_path, extra)

    try:
        if args.ablate:
            rows = []
            for name, overrides in ABLATION_VARIANTS:
                variant = PipelineConfig(**{**_config_kwargs(config), **overrides})
                variant.validate()
                sub = args.out / name
                sub.mkdir(exist_ok=True)
                result = _run_single(variant, dataset, sub, baseline=False)
                rows.append((name, result.summary))
                print(f"[{name}] done in {result.seconds_total:.1f}s")
            table = _ablation_table(rows)
            (args.out / "ablation.csv").write_text(table["csv"])
            print(table["text"])
        else:
            result = _run_single(config, dataset, args.out, baseline=args.baseline)
            print(_summary_table(result.summary))
            if result.test_rows_scored:
                per_row = 1000.0 * result.score_seconds / result.test_rows_scored
                print(f"scoring time: {per_row:.4f} ms per test row")
    except PipelineError as exc:
        print(f"pipeline aborted: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


def _config_kwargs(config: PipelineConfig) -> dict:
    data = {f: getattr(config, f) for f in config.__dataclass_fields__}
    return data


def _ablation_table(rows: list[tuple[str, ClSummary]]) -> dict[str, str]:
    def fmt(v: float | None) -> str:
        return "n/a" if v is None else f"{v:.4f}"

    csv_lines = ["variant,avg_f1,bwd_trans,fwd_trans"]
    text_lines = [f"{'variant':34} {'AVG':>8} {'BwdTrans':>10} {'FwdTrans':>10}"]
    for name, summary in rows:
        csv_lines.append(
            f"{name},{fmt(summary.avg_f1)},{fmt(summary.bwd_trans)},{fmt(summary.fwd_trans)}"
        )
        text_lines.append(
            f"{name:34} {fmt(summary.avg_f1):>8} {fmt(summary.bwd_trans):>10} {fmt(summary.fwd_trans):>10}"
        )
    return {"csv": "\n".join(csv_lines) + "\n", "text": "\n".join(text_lines)}


if __name__ == "__main__":
    sys.exit(main())
