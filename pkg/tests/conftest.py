import numpy as np
import pytest

from driftids.ingest import RawDataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def blob_dataset(
    n_normal=300,
    attack_specs=((6.0, "dos", 60), (8.0, "scan", 60)),
    dims=4,
    seed=0,
):
    """Tiny labeled dataset: one correlated normal blob plus offset attacks.

    Normal rows carry a non-axis-aligned low-rank covariance (decaying
    spectrum under a random rotation) so subspace detectors have residual
    directions to score against even after per-feature standardization.
    """
    gen = np.random.default_rng(seed)
    scales = np.geomspace(1.5, 0.1, dims)
    rotation, _ = np.linalg.qr(gen.standard_normal((dims, dims)))
    mixing = rotation @ np.diag(scales)
    features = [gen.standard_normal((n_normal, dims)) @ mixing.T]
    labels = [np.zeros(n_normal, dtype=np.int64)]
    types = [np.full(n_normal, "normal", dtype=object)]
    for offset, name, rows in attack_specs:
        direction = gen.standard_normal(dims)
        direction /= np.linalg.norm(direction)
        spread = 0.5 * gen.standard_normal((rows, dims)) @ mixing.T
        features.append(offset * direction + spread)
        labels.append(np.ones(rows, dtype=np.int64))
        types.append(np.full(rows, name, dtype=object))
    return RawDataset(
        features=np.vstack(features),
        labels=np.concatenate(labels),
        attack_types=np.concatenate(types),
        feature_names=[f"f{i}" for i in range(dims)],
    )


@pytest.fixture
def small_dataset():
    return blob_dataset()
