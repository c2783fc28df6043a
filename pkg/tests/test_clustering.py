import itertools

import numpy as np
import pytest

from src.errors import DatasetError, DimensionMismatchError
from src.state import Dataset
from src.tools.clustering import assign, fit_kmeans, inertia


def make_dataset(features: np.ndarray) -> Dataset:
    features = np.asarray(features, dtype=float)
    return Dataset(
        features=features,
        labels=np.zeros(features.shape[0], dtype=int),
        feature_names=[f"V{j + 1}" for j in range(features.shape[1])],
    )


def make_disc_blobs(n_per_blob: int, centers, radius: float = 1.0, seed: int = 0) -> Dataset:
    """Points drawn uniformly from discs of the given radius around each 2-D center."""
    rng = np.random.default_rng(seed)
    points = []
    for center in np.asarray(centers, dtype=float):
        angle = rng.uniform(0.0, 2.0 * np.pi, n_per_blob)
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, n_per_blob))
        points.append(center + np.column_stack([r * np.cos(angle), r * np.sin(angle)]))
    return make_dataset(np.vstack(points))


def best_two_partition_inertia(X: np.ndarray) -> float:
    """
    Exhaustive 2-means optimum over every linear split of 2-D points.

    An optimal 2-partition is separated by the bisector of its centroids, so it
    is a threshold split along some direction; the split order only changes at
    directions normal to a pair difference, which are all visited.
    """
    n = X.shape[0]
    angles = []
    for i, j in itertools.combinations(range(n), 2):
        dx, dy = X[j] - X[i]
        base = np.arctan2(dy, dx) + np.pi / 2
        angles += [base - 1e-7, base + 1e-7]

    total = ((X - X.mean(axis=0)) ** 2).sum()
    best = total
    for angle in angles:
        order = np.argsort(X @ np.array([np.cos(angle), np.sin(angle)]))
        Xs = X[order]
        cum = np.cumsum(Xs, axis=0)[:-1]
        cum_sq = np.cumsum((Xs ** 2).sum(axis=1))[:-1]
        sizes = np.arange(1, n)
        left = cum_sq - (cum ** 2).sum(axis=1) / sizes
        right_sum = Xs.sum(axis=0) - cum
        right = ((Xs ** 2).sum() - cum_sq) - (right_sum ** 2).sum(axis=1) / (n - sizes)
        best = min(best, float((left + right).min()))
    return best


# ---------------------------------------------------------------------------
# fit_kmeans
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(20))
def test_inertia_trace_never_increases(seed):
    rng = np.random.default_rng(seed)
    data = make_dataset(rng.normal(size=(120, 3)))
    model = fit_kmeans(data, k=int(rng.integers(2, 6)), seed=seed)
    trace = np.asarray(model.inertia_trace)
    assert np.all(np.diff(trace) <= 1e-9 * max(trace[0], 1.0))
    assert model.inertia == pytest.approx(trace[-1])


def test_recovers_planted_blobs_at_the_two_partition_optimum():
    # centers 10 radii apart, 20 points each
    data = make_disc_blobs(20, [(0.0, 0.0), (10.0, 0.0)], radius=1.0, seed=1)
    model = fit_kmeans(data, k=2, seed=0)

    labels = assign(model, data.features)
    assert len(set(labels[:20])) == 1
    assert len(set(labels[20:])) == 1
    assert labels[0] != labels[20]
    assert model.inertia == pytest.approx(best_two_partition_inertia(data.features), rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_converged_centroids_are_the_means_of_their_points(seed):
    rng = np.random.default_rng(seed)
    data = make_dataset(rng.normal(size=(2000, 2)))
    model = fit_kmeans(data, k=5, seed=seed)
    assert model.iterations_run < 300
    assert not model.reseeded_last

    labels = assign(model, data.features)
    for c in range(model.k):
        members = data.features[labels == c]
        if members.size:
            assert np.abs(model.centroids[c] - members.mean(axis=0)).max() <= 1e-9


def test_single_cluster_centroid_is_the_mean():
    data = make_disc_blobs(10, [(1, 2), (5, 5)], seed=2)
    model = fit_kmeans(data, k=1, seed=0)
    assert np.allclose(model.centroids[0], data.features.mean(axis=0))


def test_fit_is_deterministic_for_a_seed():
    data = make_dataset(np.random.default_rng(3).normal(size=(200, 2)))
    first = fit_kmeans(data, k=4, seed=11)
    second = fit_kmeans(data, k=4, seed=11)
    assert np.array_equal(first.centroids, second.centroids)


def test_duplicate_points_keep_k_clusters():
    data = make_dataset(np.r_[np.zeros((8, 2)), np.ones((2, 2))])
    model = fit_kmeans(data, k=3, seed=0)
    assert model.centroids.shape == (3, 2)


@pytest.mark.parametrize("k", [0, 11])
def test_invalid_cluster_count(k):
    data = make_dataset(np.random.default_rng(0).normal(size=(10, 2)))
    with pytest.raises(DatasetError):
        fit_kmeans(data, k=k, seed=0)


# ---------------------------------------------------------------------------
# assign
# ---------------------------------------------------------------------------


def test_assign_matches_nearest_centroid_oracle():
    rng = np.random.default_rng(4)
    data = make_dataset(rng.normal(size=(150, 3)))
    model = fit_kmeans(data, k=5, seed=4)
    queries = rng.normal(size=(60, 3))
    expected = [
        int(np.argmin([((q - c) ** 2).sum() for c in model.centroids]))
        for q in queries
    ]
    assert assign(model, queries).tolist() == expected
    assert inertia(data.features, model.centroids) == pytest.approx(model.inertia)


def test_assign_breaks_ties_toward_lowest_index():
    data = make_dataset([[0.0], [2.0]])
    model = fit_kmeans(data, k=2, seed=0)
    assert assign(model, [[1.0]]).tolist() == [0]


def test_assign_rejects_wrong_dimension():
    model = fit_kmeans(make_dataset(np.random.default_rng(0).normal(size=(20, 3))), k=2, seed=0)
    with pytest.raises(DimensionMismatchError):
        assign(model, np.zeros((4, 2)))
