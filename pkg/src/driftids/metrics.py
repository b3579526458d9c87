"""Threshold selection, detection metrics, and stream-evaluation summaries.

Results are collected in an m-by-m matrix: row i holds the scores obtained
after training through experience i, column j the evaluation on experience
j's test set. Diagonal cells measure seen attacks, the strict upper triangle
measures future (zero-day) attacks, and the final row against the diagonal
measures forgetting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ResultsMatrix:
    f1: np.ndarray  # (m, m)
    pr_auc: np.ndarray  # (m, m)
    mask: np.ndarray  # (m, m) bool, True = cell not evaluable
    thresholds: np.ndarray  # (m, m) threshold used per cell

    @classmethod
    def empty(cls, m: int) -> "ResultsMatrix":
        return cls(
            f1=np.full((m, m), np.nan),
            pr_auc=np.full((m, m), np.nan),
            mask=np.ones((m, m), dtype=bool),
            thresholds=np.full((m, m), np.nan),
        )

    @property
    def m(self) -> int:
        return self.f1.shape[0]


@dataclass(frozen=True)
class ClSummary:
    """Aggregates of the results matrix.

    ``bwd_trans`` follows the printed convention dividing the final-row minus
    diagonal sum by m*(m-1)/2; ``bwd_trans_mean`` divides by the number of
    summed cells (m-1) instead. Transfers are None when m == 1.
    """

    avg_f1: float
    fwd_trans: float | None
    bwd_trans: float | None
    bwd_trans_mean: float | None
    has_masked: bool


def f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """F1 with attacks as the positive class; 0 when the denominator is 0."""
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError("prediction/truth lengths differ")
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def _threshold_candidates(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive unique scores plus below/above sentinels."""
    unique = np.unique(scores)
    mids = (unique[:-1] + unique[1:]) / 2.0
    return np.concatenate([[unique[0] - 1.0], mids, [unique[-1] + 1.0]])


def best_f_threshold(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Threshold maximizing F1 of the predicate ``score > threshold``.

    Ties are broken toward the larger threshold (fewer predicted attacks).
    Requires both classes; single-class label vectors are the caller's cue
    to mask the cell.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores/labels lengths differ")
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise ValueError("labels must contain both classes")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.int64)
    # suffix_pos[i] = attacks among scores[i:], so a cut keeping indices > i
    # predicts suffix_pos positives correctly.
    suffix_pos = np.concatenate([np.cumsum(sorted_pos[::-1])[::-1], [0]])
    total_pos = int(suffix_pos[0])
    best_tau, best_f1 = -np.inf, -1.0
    for tau in _threshold_candidates(scores):
        cut = int(np.searchsorted(sorted_scores, tau, side="right"))
        tp = int(suffix_pos[cut])
        predicted = len(scores) - cut
        fp = predicted - tp
        fn = total_pos - tp
        denom = 2 * tp + fp + fn
        value = 0.0 if denom == 0 else 2.0 * tp / denom
        if value >= best_f1:  # >= keeps the larger tau on ties
            best_tau, best_f1 = float(tau), value
    return best_tau, best_f1


def pr_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Average precision over descending-score cuts, grouping tied scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores/labels lengths differ")
    total_pos = int(np.sum(labels == 1))
    total_neg = int(np.sum(labels == 0))
    if total_pos == 0 or total_neg == 0:
        raise ValueError("labels must contain both classes")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(np.int64)
    area = 0.0
    prev_recall = 0.0
    tp = 0
    seen = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(sorted_pos[i:j].sum())
        seen = j
        precision = tp / seen
        recall = tp / total_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return area


def summarize(matrix: ResultsMatrix) -> ClSummary:
    """Diagonal average, forward transfer, and backward transfer of the matrix."""
    m = matrix.m
    if m < 1:
        raise ValueError("empty results matrix")
    valid = ~matrix.mask
    has_masked = bool(matrix.mask.any())

    diag_valid = np.diagonal(valid)
    diag = np.diagonal(matrix.f1)[diag_valid]
    if diag.size == 0:
        raise ValueError("every diagonal cell is masked; no seen-attack metric")
    avg = float(diag.mean())

    if m == 1:
        return ClSummary(avg, None, None, None, has_masked)

    upper_i, upper_j = np.triu_indices(m, k=1)
    upper_valid = valid[upper_i, upper_j]
    upper = matrix.f1[upper_i, upper_j][upper_valid]
    fwd = float(upper.mean()) if upper.size else None

    final_valid = valid[m - 1, :] & np.diagonal(valid)
    diffs = (matrix.f1[m - 1, :] - np.diagonal(matrix.f1))[final_valid]
    if diffs.size:
        bwd = float(diffs.sum() / (m * (m - 1) / 2.0))
        # The final-row-vs-itself term is identically zero, so the mean
        # variant averages over the other m-1 comparisons.
        n_diffs = int(final_valid.sum()) - (1 if final_valid[m - 1] else 0)
        bwd_mean = float(diffs.sum() / n_diffs) if n_diffs > 0 else None
    else:
        bwd, bwd_mean = None, None
    return ClSummary(avg, fwd, bwd, bwd_mean, has_masked)
