"""End-to-end experiment loop over the experience stream.

Per experience: pseudo-label the unlabeled train pool via K-Means against
the clean-normal holdout, train the feature extractor on the composite loss,
snapshot the encoder, refit the subspace detector on the encoded holdout,
then score every experience's test set and fill one row of the results
matrix. The loop is strictly sequential; earlier experiences' raw data is
never revisited.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autoencoder as ae
from .clustering import PseudoLabels, assign_pseudo_labels, fit_kmeans, select_k_elbow
from .config import PipelineConfig
from .experiences import ExperienceSet, split
from .ingest import RawDataset, Standardizer, apply_standardizer, fit_standardizer
from .losses import LossWeights
from .metrics import ClSummary, ResultsMatrix, best_f_threshold, f1, pr_auc, summarize
from .pca import PcaModel, fit_pca, score_fre
from .training import TrainSettings, train_experience

# Purpose tags mixed into the master seed, one independent stream each.
_SEED_SPLIT = 11
_SEED_INIT = 12
_SEED_MINING = 13
_SEED_KMEANS = 14


class PipelineError(RuntimeError):
    """A pipeline phase failed; carries the experience and phase for reports."""

    def __init__(self, experience: int, phase: str, cause: Exception):
        super().__init__(f"experience {experience}, phase '{phase}': {cause}")
        self.experience = experience
        self.phase = phase
        self.cause = cause


@dataclass
class ExperienceDiagnostics:
    index: int
    k_chosen: int
    inertia_curve: dict[int, float]
    normal_cluster_count: int
    pseudo_label_attack_fraction: float
    pca_components: int
    phase_seconds: dict[str, float]


@dataclass
class RunState:
    config: PipelineConfig
    standardizer: Standardizer
    clean_normal: np.ndarray
    experiences: ExperienceSet
    params: ae.MlpParams | None
    adam: ae.AdamState | None
    snapshots: list[ae.EncoderSnapshot]
    pca: PcaModel | None
    results: ResultsMatrix
    current_experience: int = -1


@dataclass
class RunResult:
    results: ResultsMatrix
    summary: ClSummary
    diagnostics: list[ExperienceDiagnostics]
    state: RunState
    train_log: list[dict] = field(default_factory=list)
    pca_models: list[PcaModel] = field(default_factory=list)
    seconds_total: float = 0.0
    test_rows_scored: int = 0
    score_seconds: float = 0.0


def _encode_fn(params: ae.MlpParams | None) -> Callable[[np.ndarray], np.ndarray]:
    if params is None:
        return lambda x: np.asarray(x, dtype=np.float64)
    return lambda x: ae.encode(params, x)


def _threshold_quantile(config: PipelineConfig) -> float | None:
    if config.threshold_mode.startswith("quantile:"):
        return float(config.threshold_mode.split(":", 1)[1])
    return None


def evaluate_row(
    encode: Callable[[np.ndarray], np.ndarray],
    pca: PcaModel,
    test_sets: list[tuple[np.ndarray, np.ndarray, bool]],
    config: PipelineConfig,
    clean_normal: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Score every experience's test set with the current model.

    ``test_sets`` holds (features, labels, degenerate) per experience.
    Returns (f1 row, pr-auc row, threshold row, mask row). Degenerate cells
    are masked but still contribute scores to pooled threshold selection.
    """
    m = len(test_sets)
    scores: list[np.ndarray] = []
    for features, _, _ in test_sets:
        scores.append(score_fre(pca, encode(features)))

    quantile = _threshold_quantile(config)
    if quantile is not None:
        if clean_normal is None:
            raise ValueError("quantile thresholding needs the clean-normal holdout")
        tau_global = float(np.quantile(score_fre(pca, encode(clean_normal)), quantile))
    elif not config.per_cell_threshold:
        pooled_scores = np.concatenate(scores)
        pooled_labels = np.concatenate([labels for _, labels, _ in test_sets])
        tau_global, _ = best_f_threshold(pooled_scores, pooled_labels)
    else:
        tau_global = None

    f1_row = np.full(m, np.nan)
    pr_row = np.full(m, np.nan)
    tau_row = np.full(m, np.nan)
    mask_row = np.ones(m, dtype=bool)
    for j, (features, labels, degenerate) in enumerate(test_sets):
        if degenerate:
            continue
        if tau_global is not None:
            tau = tau_global
        else:
            tau, _ = best_f_threshold(scores[j], labels)
        predictions = scores[j] > tau
        f1_row[j] = f1(predictions, labels)
        pr_row[j] = pr_auc(scores[j], labels)
        tau_row[j] = tau
        mask_row[j] = False
    return f1_row, pr_row, tau_row, mask_row


def _prepare(config: PipelineConfig, dataset: RawDataset) -> RunState:
    exp_set = split(
        dataset, config.num_experiences, config.test_fraction, _compound_seed(config.seed, _SEED_SPLIT)
    )
    standardizer = fit_standardizer(exp_set.clean_normal)
    return RunState(
        config=config,
        standardizer=standardizer,
        clean_normal=apply_standardizer(standardizer, exp_set.clean_normal),
        experiences=exp_set,
        params=None,
        adam=None,
        snapshots=[],
        pca=None,
        results=ResultsMatrix.empty(config.num_experiences),
    )


def _compound_seed(master: int, purpose: int, extra: int | None = None) -> int:
    parts = [master, purpose] if extra is None else [master, purpose, extra]
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _standardized_test_sets(state: RunState) -> list[tuple[np.ndarray, np.ndarray, bool]]:
    return [
        (
            apply_standardizer(state.standardizer, exp.test_features),
            exp.test_labels,
            exp.degenerate,
        )
        for exp in state.experiences.experiences
    ]


def run(
    config: PipelineConfig,
    dataset: RawDataset,
    on_experience_end: Callable[[RunState], None] | None = None,
) -> RunResult:
    """Run the full continual train/evaluate loop on a loaded dataset."""
    config.validate()
    started = time.perf_counter()
    state = _prepare(config, dataset)
    test_sets = _standardized_test_sets(state)

    input_dim = dataset.n_features
    state.params, state.adam = ae.init(
        input_dim,
        config.latent_dim,
        config.hidden_width,
        seed=_compound_seed(config.seed, _SEED_INIT),
        learning_rate=config.learning_rate,
    )
    weights = LossWeights(
        lambda_recon=0.0 if config.disable_reconstruction else config.lambda_recon,
        lambda_continual=0.0 if config.disable_continual else config.lambda_continual,
        margin=config.margin,
    )
    settings = TrainSettings(
        epochs=config.epochs,
        batch_size=config.batch_size,
        max_triplets=config.max_triplets,
        weights=weights,
        use_cluster_separation=not config.disable_cluster_separation,
        triplet_mining=config.triplet_mining,
    )

    diagnostics: list[ExperienceDiagnostics] = []
    train_log: list[dict] = []
    pca_models: list[PcaModel] = []
    rows_scored = 0
    score_seconds = 0.0
    for i, experience in enumerate(state.experiences.experiences):
        state.current_experience = i
        timings: dict[str, float] = {}
        x_train = apply_standardizer(state.standardizer, experience.train_features)

        phase = "cluster"
        try:
            t0 = time.perf_counter()
            k_max = min(config.k_max, x_train.shape[0])
            k_min = min(config.k_min, k_max)
            k, inertia_curve = select_k_elbow(
                x_train, k_min, k_max, seed=_compound_seed(config.seed, _SEED_KMEANS, i)
            )
            kmeans = fit_kmeans(
                x_train,
                k,
                seed=_compound_seed(config.seed, _SEED_KMEANS, i),
                max_iter=config.kmeans_max_iter,
                tol=config.kmeans_tol,
            )
            pseudo: PseudoLabels = assign_pseudo_labels(kmeans, x_train, state.clean_normal)
            timings[phase] = time.perf_counter() - t0

            phase = "train"
            t0 = time.perf_counter()
            mining_rng = np.random.default_rng(_compound_seed(config.seed, _SEED_MINING, i))
            train_experience(
                state.params,
                state.adam,
                x_train,
                pseudo.labels,
                state.snapshots,
                settings,
                mining_rng,
                log_rows=train_log,
                experience_index=i,
            )
            timings[phase] = time.perf_counter() - t0

            phase = "snapshot"
            state.snapshots.append(ae.snapshot(state.params, i))

            phase = "fit-detector"
            t0 = time.perf_counter()
            h_normal = ae.encode(state.params, state.clean_normal)
            state.pca = fit_pca(h_normal, config.variance_target)
            pca_models.append(state.pca)
            timings[phase] = time.perf_counter() - t0

            phase = "evaluate"
            t0 = time.perf_counter()
            f1_row, pr_row, tau_row, mask_row = evaluate_row(
                _encode_fn(state.params), state.pca, test_sets, config, state.clean_normal
            )
            timings[phase] = time.perf_counter() - t0
            score_seconds += timings[phase]
            rows_scored += sum(features.shape[0] for features, _, _ in test_sets)
        except Exception as exc:  # noqa: BLE001 - annotate and re-raise
            raise PipelineError(i, phase, exc) from exc

        state.results.f1[i, :] = f1_row
        state.results.pr_auc[i, :] = pr_row
        state.results.thresholds[i, :] = tau_row
        state.results.mask[i, :] = mask_row
        diagnostics.append(
            ExperienceDiagnostics(
                index=i,
                k_chosen=k,
                inertia_curve=inertia_curve,
                normal_cluster_count=len(pseudo.normal_cluster_ids),
                pseudo_label_attack_fraction=float(pseudo.labels.mean()),
                pca_components=state.pca.k,
                phase_seconds=timings,
            )
        )
        if on_experience_end is not None:
            on_experience_end(state)

    return RunResult(
        results=state.results,
        summary=summarize(state.results),
        diagnostics=diagnostics,
        state=state,
        train_log=train_log,
        pca_models=pca_models,
        seconds_total=time.perf_counter() - started,
        test_rows_scored=rows_scored,
        score_seconds=score_seconds,
    )


def baseline_pca_run(config: PipelineConfig, dataset: RawDataset) -> RunResult:
    """Same protocol with the feature extractor replaced by identity.

    The detector is fitted once on standardized raw holdout data; no
    training, no snapshots. Rows can differ only through threshold
    selection.
    """
    config.validate()
    started = time.perf_counter()
    state = _prepare(config, dataset)
    test_sets = _standardized_test_sets(state)

    diagnostics: list[ExperienceDiagnostics] = []
    rows_scored = 0
    score_seconds = 0.0
    for i in range(config.num_experiences):
        state.current_experience = i
        phase = "fit-detector"
        try:
            t0 = time.perf_counter()
            state.pca = fit_pca(state.clean_normal, config.variance_target)
            fit_seconds = time.perf_counter() - t0

            phase = "evaluate"
            t0 = time.perf_counter()
            f1_row, pr_row, tau_row, mask_row = evaluate_row(
                _encode_fn(None), state.pca, test_sets, config, state.clean_normal
            )
            eval_seconds = time.perf_counter() - t0
            score_seconds += eval_seconds
            rows_scored += sum(features.shape[0] for features, _, _ in test_sets)
        except Exception as exc:  # noqa: BLE001
            raise PipelineError(i, phase, exc) from exc
        state.results.f1[i, :] = f1_row
        state.results.pr_auc[i, :] = pr_row
        state.results.thresholds[i, :] = tau_row
        state.results.mask[i, :] = mask_row
        diagnostics.append(
            ExperienceDiagnostics(
                index=i,
                k_chosen=0,
                inertia_curve={},
                normal_cluster_count=0,
                pseudo_label_attack_fraction=float("nan"),
                pca_components=state.pca.k,
                phase_seconds={"fit-detector": fit_seconds, "evaluate": eval_seconds},
            )
        )

    return RunResult(
        results=state.results,
        summary=summarize(state.results),
        diagnostics=diagnostics,
        state=state,
        train_log=[],
        seconds_total=time.perf_counter() - started,
        test_rows_scored=rows_scored,
        score_seconds=score_seconds,
    )
