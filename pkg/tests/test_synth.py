import numpy as np
import pytest

from driftids.experiences import split
from driftids.ingest import CsvSchema, load_csv
from driftids.synth import AttackCluster, SynthSpec, default_drift_spec, generate, write_csv


def small_spec(seed=0, **overrides):
    base = dict(
        dims=4,
        n_normal=400,
        attacks=(
            AttackCluster("a", 6.0, 1.0, 80, 0),
            AttackCluster("b", 7.0, 1.0, 80, 1),
        ),
        seed=seed,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestGenerate:
    def test_deterministic(self):
        a, _ = generate(small_spec())
        b, _ = generate(small_spec())
        assert np.array_equal(a.features, b.features)

    def test_two_seeds_differ_same_geometry(self):
        a, _ = generate(small_spec(seed=1))
        b, _ = generate(small_spec(seed=2))
        assert not np.array_equal(a.features, b.features)
        for data in (a, b):
            center = data.features[data.attack_types == "a"].mean(axis=0)
            assert np.linalg.norm(center) == pytest.approx(6.0, abs=0.5)

    def test_passes_ingest_validation(self):
        dataset, _ = generate(small_spec())
        dataset.validate()

    def test_assignment_map(self):
        _, assignment = generate(small_spec())
        assert assignment == {"a": 0, "b": 1}

    def test_null_offset_overlaps_normals(self):
        spec = small_spec(attacks=(AttackCluster("a", 0.0, 1.0, 200, 0),))
        dataset, _ = generate(spec)
        attack_mean = dataset.features[dataset.labels == 1].mean(axis=0)
        assert np.linalg.norm(attack_mean) < 0.5

    def test_cluster_moments(self):
        dataset, _ = generate(small_spec())
        normal = dataset.features[dataset.labels == 0]
        assert np.linalg.norm(normal.mean(axis=0)) < 4.0 * np.sqrt(4 / 400)

    def test_subspace_attack_invisible_in_residual_directions(self):
        spec = default_drift_spec()
        dataset, _ = generate(spec)
        # Recover the factor subspace from the normal rows themselves.
        normal = dataset.features[dataset.labels == 0]
        centered = normal - normal.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        basis = vt[: spec.normal_rank]
        sneaky = dataset.features[dataset.attack_types == "attack_b"].mean(axis=0)
        out_of_plane = sneaky - basis.T @ (basis @ sneaky)
        assert np.linalg.norm(out_of_plane) < 0.5  # displacement lies in-plane
        far = dataset.features[dataset.attack_types == "attack_a"].mean(axis=0)
        far_out = far - basis.T @ (basis @ far)
        assert np.linalg.norm(far_out) > 1.0

    def test_splitter_consumes_fixture(self):
        dataset, _ = generate(default_drift_spec())
        exp_set = split(dataset, m=3, test_fraction=0.3, seed=0)
        assert exp_set.num_experiences == 3
        assert sum(len(e.attack_classes) for e in exp_set.experiences) == 6

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            AttackCluster("x", -1.0, 1.0, 10, 0)
        with pytest.raises(ValueError):
            AttackCluster("x", 1.0, 1.0, 0, 0)
        with pytest.raises(ValueError, match="contiguous"):
            small_spec(attacks=(AttackCluster("a", 5.0, 1.0, 10, 1),))
        with pytest.raises(ValueError, match="normal_rank"):
            small_spec(attacks=(AttackCluster("a", 5.0, 1.0, 10, 0, subspace_fraction=0.5),))


class TestCsvEmission:
    def test_round_trip_through_ingest(self, tmp_path):
        dataset, _ = generate(small_spec())
        path = tmp_path / "synth.csv"
        write_csv(dataset, path)
        loaded, report = load_csv(path, CsvSchema(label_column="label", attack_type_column="attack_type"))
        assert report.rows_dropped == 0
        assert np.array_equal(loaded.features, dataset.features)  # repr round-trip is exact
        assert np.array_equal(loaded.labels, dataset.labels)
        assert loaded.attack_types.tolist() == dataset.attack_types.tolist()
