import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from driftids.metrics import ResultsMatrix, best_f_threshold, f1, pr_auc, summarize


def random_case(seed, n_max=200):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, n_max + 1))
    # Ties are likely: scores drawn from a small grid half the time.
    if rng.uniform() < 0.5:
        scores = rng.integers(0, 10, size=n).astype(float)
    else:
        scores = rng.standard_normal(n)
    labels = rng.integers(0, 2, size=n)
    if labels.sum() == 0:
        labels[0] = 1
    if labels.sum() == n:
        labels[0] = 0
    return scores, labels


class TestF1:
    def test_perfect(self):
        assert f1([0, 1, 1], [0, 1, 1]) == 1.0

    def test_all_negative_prediction(self):
        assert f1([0, 0, 0], [0, 1, 1]) == 0.0

    def test_confusion_counts(self):
        pred = [1, 1, 1, 0, 0]
        truth = [1, 1, 0, 1, 0]  # TP=2 FP=1 FN=1
        assert f1(pred, truth) == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))

    def test_degenerate_zero_denominator(self):
        assert f1([0, 0], [0, 0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1([0, 1], [0, 1, 1])


class TestBestF:
    def test_perfectly_separable(self):
        tau, value = best_f_threshold(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0, 0, 1, 1]))
        assert 2.0 < tau < 3.0
        assert value == 1.0

    def test_all_equal_scores(self):
        scores = np.full(10, 3.3)
        labels = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        tau, value = best_f_threshold(scores, labels)
        assert tau < 3.3
        prevalence = 0.3
        assert value == pytest.approx(2 * prevalence / (prevalence + 1))

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_exhaustive_search(self, seed):
        scores, labels = random_case(seed)
        assert best_f_threshold(scores, labels) == oracles.best_f_brute(scores, labels)

    def test_self_consistency(self):
        for seed in range(10):
            scores, labels = random_case(seed + 500)
            tau, value = best_f_threshold(scores, labels)
            assert f1(scores > tau, labels) == value

    def test_tie_breaks_toward_larger_threshold(self):
        # Cut-below-everything and cut-above-3 both reach F1 = 2/3 here; the
        # larger threshold (fewer predicted attacks) must win.
        scores = np.array([1.0, 2.0, 3.0, 4.0])
        labels = np.array([1, 0, 0, 1])
        tau, value = best_f_threshold(scores, labels)
        assert value == pytest.approx(2 / 3)
        assert tau == pytest.approx(3.5)
        assert (tau, value) == oracles.best_f_brute(scores, labels)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            best_f_threshold(np.array([1.0, 2.0]), np.array([1, 1]))


class TestPrAuc:
    def test_perfect_ranking(self):
        scores = np.array([0.1, 0.2, 0.9, 0.8])
        labels = np.array([0, 0, 1, 1])
        assert pr_auc(scores, labels) == 1.0

    def test_reversed_ranking_matches_oracle(self):
        scores = np.array([4.0, 3.0, 2.0, 1.0])
        labels = np.array([0, 0, 1, 1])
        assert pr_auc(scores, labels) == oracles.pr_auc_brute(scores, labels)

    @pytest.mark.parametrize("seed", range(25))
    def test_matches_prefix_enumeration_exactly(self, seed):
        scores, labels = random_case(seed + 1000)
        assert pr_auc(scores, labels) == oracles.pr_auc_brute(scores, labels)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_monotone_transform(self, seed):
        scores, labels = random_case(seed + 77)
        base = pr_auc(scores, labels)
        assert pr_auc(3.0 * scores + 11.0, labels) == pytest.approx(base, rel=1e-12)
        assert pr_auc(np.exp(scores / np.abs(scores).max()), labels) == pytest.approx(base, rel=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            pr_auc(np.array([1.0, 2.0]), np.array([0, 0]))


def full_matrix(f1_values):
    f1_values = np.asarray(f1_values, dtype=np.float64)
    m = f1_values.shape[0]
    return ResultsMatrix(
        f1=f1_values,
        pr_auc=np.zeros_like(f1_values),
        mask=np.zeros((m, m), dtype=bool),
        thresholds=np.zeros_like(f1_values),
    )


class TestSummarize:
    def test_constant_matrix(self):
        summary = summarize(full_matrix(np.full((4, 4), 0.6)))
        assert summary.avg_f1 == pytest.approx(0.6)
        assert summary.fwd_trans == pytest.approx(0.6)
        assert summary.bwd_trans == pytest.approx(0.0)

    def test_two_by_two_hand_case(self):
        summary = summarize(full_matrix([[0.8, 0.4], [0.9, 0.6]]))
        assert summary.avg_f1 == pytest.approx(0.7)
        assert summary.fwd_trans == pytest.approx(0.4)
        assert summary.bwd_trans == pytest.approx(0.1)
        assert summary.bwd_trans_mean == pytest.approx(0.1)

    def test_sentinel_indexing(self):
        # Distinct entries verify which cells feed which aggregate.
        matrix = full_matrix([[0.11, 0.12, 0.13], [0.21, 0.22, 0.23], [0.31, 0.32, 0.33]])
        summary = summarize(matrix)
        assert summary.avg_f1 == pytest.approx((0.11 + 0.22 + 0.33) / 3)
        assert summary.fwd_trans == pytest.approx((0.12 + 0.13 + 0.23) / 3)
        expected_bwd = ((0.31 - 0.11) + (0.32 - 0.22) + (0.33 - 0.33)) / 3
        assert summary.bwd_trans == pytest.approx(expected_bwd)
        assert summary.bwd_trans_mean == pytest.approx(expected_bwd * 3 / 2)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_direct_formula_evaluation(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.uniform(size=(5, 5))
        summary = summarize(full_matrix(values))
        avg, fwd, bwd = oracles.summarize_direct(values)
        assert summary.avg_f1 == pytest.approx(avg, abs=1e-12)
        assert summary.fwd_trans == pytest.approx(fwd, abs=1e-12)
        assert summary.bwd_trans == pytest.approx(bwd, abs=1e-12)

    def test_negative_backward_transfer_signals_forgetting(self):
        summary = summarize(full_matrix([[0.9, 0.5], [0.2, 0.9]]))
        assert summary.bwd_trans < 0.0

    def test_single_experience(self):
        summary = summarize(full_matrix([[0.85]]))
        assert summary.avg_f1 == pytest.approx(0.85)
        assert summary.fwd_trans is None
        assert summary.bwd_trans is None

    def test_masked_cells_flagged_and_skipped(self):
        matrix = full_matrix([[0.8, 0.4], [0.9, 0.6]])
        matrix.mask[0, 1] = True
        summary = summarize(matrix)
        assert summary.has_masked
        assert summary.fwd_trans is None  # the only strict-upper cell is masked
        assert summary.avg_f1 == pytest.approx(0.7)

    def test_all_diagonal_masked_rejected(self):
        matrix = full_matrix([[0.8, 0.4], [0.9, 0.6]])
        matrix.mask[0, 0] = matrix.mask[1, 1] = True
        with pytest.raises(ValueError):
            summarize(matrix)
