import numpy as np
import pytest

import oracles
from driftids.clustering import (
    assign_clusters,
    assign_pseudo_labels,
    fit_kmeans,
    select_k_elbow,
)


def blobs(rng, centers, n_each=50, spread=0.3):
    points = [c + spread * rng.standard_normal((n_each, len(c))) for c in np.asarray(centers, dtype=float)]
    return np.vstack(points)


class TestFitKmeans:
    def test_two_separated_blobs(self, rng):
        data = blobs(rng, [[0.0, 0.0], [10.0, 10.0]])
        model = fit_kmeans(data, k=2, seed=0)
        found = model.centroids[np.argsort(model.centroids[:, 0])]
        sample_means = np.vstack([data[:50].mean(axis=0), data[50:].mean(axis=0)])
        assert np.abs(found - sample_means).max() < 0.1

    def test_k_equals_n_rows_zero_inertia(self, rng):
        data = rng.standard_normal((12, 3))
        model = fit_kmeans(data, k=12, seed=0)
        assert model.inertia == pytest.approx(0.0, abs=1e-18)

    def test_duplicated_rows_same_centroids(self, rng):
        data = blobs(rng, [[0.0, 0.0], [8.0, 8.0], [-8.0, 8.0]])
        a = fit_kmeans(data, k=3, seed=0)
        b = fit_kmeans(np.vstack([data, data]), k=3, seed=0)
        sa = a.centroids[np.lexsort(a.centroids.T)]
        sb = b.centroids[np.lexsort(b.centroids.T)]
        assert np.abs(sa - sb).max() < 1e-6

    def test_inertia_reproduced_by_brute_force(self, rng):
        data = rng.standard_normal((80, 4))
        model = fit_kmeans(data, k=5, seed=3)
        assignment = oracles.nearest_centroid_brute(data, model.centroids)
        inertia = sum(
            float(((row - model.centroids[j]) ** 2).sum()) for row, j in zip(data, assignment)
        )
        assert inertia == pytest.approx(model.inertia, rel=1e-9)

    def test_deterministic_under_seed(self, rng):
        data = rng.standard_normal((60, 3))
        a = fit_kmeans(data, k=4, seed=11)
        b = fit_kmeans(data, k=4, seed=11)
        assert np.array_equal(a.centroids, b.centroids)

    def test_errors(self, rng):
        data = rng.standard_normal((5, 2))
        with pytest.raises(ValueError):
            fit_kmeans(data, k=6, seed=0)
        with pytest.raises(ValueError):
            fit_kmeans(np.array([[np.nan, 1.0]]), k=1, seed=0)


class TestElbow:
    def test_three_blobs(self, rng):
        data = blobs(rng, [[0, 0], [10, 0], [0, 10]], n_each=60, spread=0.5)
        k, curve = select_k_elbow(data, 2, 8, seed=0)
        assert k == 3
        assert set(curve) == set(range(2, 9))

    def test_uniform_data_deterministic(self, rng):
        data = rng.uniform(size=(100, 3))
        a, _ = select_k_elbow(data, 2, 6, seed=5)
        b, _ = select_k_elbow(data, 2, 6, seed=5)
        assert a == b

    def test_width_one_range(self, rng):
        data = rng.standard_normal((30, 2))
        k, _ = select_k_elbow(data, 4, 4, seed=0)
        assert k == 4

    def test_empty_range(self, rng):
        with pytest.raises(ValueError):
            select_k_elbow(rng.standard_normal((10, 2)), 5, 4, seed=0)


class TestPseudoLabels:
    def test_holdout_blob_marks_members_normal(self, rng):
        data = blobs(rng, [[0, 0], [10, 0], [0, 10]], n_each=60, spread=0.5)
        n_c = 0.5 * rng.standard_normal((30, 2))  # occupies the first blob only
        model = fit_kmeans(data, k=3, seed=2)
        pseudo = assign_pseudo_labels(model, data, n_c)
        # Brute-force oracle: clusters holding any holdout point are normal.
        centroid_of_nc = set(oracles.nearest_centroid_brute(n_c, model.centroids).tolist())
        expected = np.array(
            [0 if c in centroid_of_nc else 1 for c in oracles.nearest_centroid_brute(data, model.centroids)]
        )
        assert np.array_equal(pseudo.labels, expected)
        assert pseudo.normal_cluster_ids == frozenset(centroid_of_nc)
        # With this geometry: first blob normal, others anomalous.
        assert pseudo.labels[:60].sum() == 0
        assert pseudo.labels[60:].sum() == 120

    def test_holdout_everywhere_all_normal(self, rng):
        data = blobs(rng, [[0, 0], [6, 6]], n_each=40)
        model = fit_kmeans(data, k=2, seed=0)
        pseudo = assign_pseudo_labels(model, data, data.copy())
        assert pseudo.labels.sum() == 0

    def test_empty_holdout_rejected(self, rng):
        data = rng.standard_normal((20, 2))
        model = fit_kmeans(data, k=2, seed=0)
        with pytest.raises(ValueError, match="empty"):
            assign_pseudo_labels(model, data, np.empty((0, 2)))

    def test_dimension_mismatch(self, rng):
        data = rng.standard_normal((20, 2))
        model = fit_kmeans(data, k=2, seed=0)
        with pytest.raises(ValueError, match="dimension"):
            assign_pseudo_labels(model, data, rng.standard_normal((5, 3)))

    def test_deterministic(self, rng):
        data = blobs(rng, [[0, 0], [7, 7]], n_each=40)
        n_c = 0.4 * rng.standard_normal((20, 2))
        model = fit_kmeans(data, k=2, seed=1)
        a = assign_pseudo_labels(model, data, n_c)
        b = assign_pseudo_labels(model, data, n_c)
        assert np.array_equal(a.labels, b.labels)


class TestAssignClusters:
    def test_matches_brute_force(self, rng):
        data = rng.standard_normal((50, 3))
        centroids = rng.standard_normal((4, 3))
        assert np.array_equal(
            assign_clusters(data, centroids), oracles.nearest_centroid_brute(data, centroids)
        )
