"""
K-means (Lloyd iteration) from k-means++ seeding.

Stopping: labels unchanged or max_iter. Once the relative inertia improvement
drops below tol, no more reseeding happens and the means are refreshed until the
labels settle, so a converged centroid is the mean of its assigned points.
A cluster left empty by an assignment step is reseeded to the training point
farthest from its assigned centroid, keeping k fixed.
"""

import logging

import numpy as np

from src.errors import DatasetError, DimensionMismatchError
from src.learners.knn import squared_distances
from src.state import Dataset, KMeansModel

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-4

_BLOCK_CELLS = 4_000_000


def _nearest(features: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(label, squared distance) of the nearest centroid per row; ties go to the lowest index."""
    n = features.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    block = max(1, _BLOCK_CELLS // max(centroids.shape[0], 1))
    for start in range(0, n, block):
        d2 = squared_distances(features[start:start + block], centroids)
        labels[start:start + block] = np.argmin(d2, axis=1)
        dist[start:start + block] = d2[np.arange(d2.shape[0]), labels[start:start + block]]
    return labels, dist


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(n)]
    closest = squared_distances(X, centroids[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = rng.choice(n, p=closest / total)
        else:
            pick = rng.integers(n)
        centroids[c] = X[pick]
        closest = np.minimum(closest, squared_distances(X, centroids[c:c + 1])[:, 0])
    return centroids


def inertia(features: np.ndarray, centroids: np.ndarray) -> float:
    return float(_nearest(np.asarray(features, dtype=np.float64), centroids)[1].sum())


def _means(X: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster means of the labelled rows; an empty cluster keeps its centroid."""
    updated = centroids.copy()
    counts = np.bincount(labels, minlength=centroids.shape[0])
    for c in np.flatnonzero(counts):
        updated[c] = X[labels == c].mean(axis=0)
    return updated, counts


def fit_kmeans(
    data: Dataset,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> KMeansModel:
    X = data.features
    n = X.shape[0]
    if k < 1:
        raise DatasetError(f"k must be at least 1, got {k}")
    if k > n:
        raise DatasetError(f"k={k} exceeds the {n} objects available")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_plus_plus(X, k, rng)
    labels, dist = _nearest(X, centroids)
    current = float(dist.sum())
    trace = [current]
    iterations = 0
    reseeded = False
    settling = False

    for iterations in range(1, max_iter + 1):
        updated, counts = _means(X, labels, centroids)
        reseeded = False
        empty = np.flatnonzero(counts == 0)
        if empty.size and not settling:
            far = np.argsort(-dist, kind="mergesort")
            for c, point in zip(empty, far):
                updated[c] = X[point]
            reseeded = True
            logger.debug("k-means: reseeded %d empty cluster(s) at iteration %d", empty.size, iterations)

        new_labels, dist = _nearest(X, updated)
        value = float(dist.sum())
        centroids = updated
        trace.append(value)
        improvement = (current - value) / current if current > 0 else 0.0
        unchanged = np.array_equal(new_labels, labels)
        labels, current = new_labels, value
        if unchanged and not reseeded:
            break
        if improvement < tol and not reseeded and not settling:
            # descent has stalled; keep refreshing means until the labels stop moving
            settling = True
            logger.debug("k-means: improvement %.3g below tol at iteration %d", improvement, iterations)
    else:
        logger.warning("k-means: reached max_iter=%d before convergence", max_iter)

    return KMeansModel(
        k=k,
        centroids=centroids,
        inertia=current,
        iterations_run=iterations,
        inertia_trace=trace,
        reseeded_last=reseeded,
    )


def assign(model: KMeansModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1 and features.size == 0:
        return np.zeros(0, dtype=np.int64)
    if features.ndim != 2 or features.shape[1] != model.centroids.shape[1]:
        raise DimensionMismatchError(
            f"centroids have {model.centroids.shape[1]} features, got input of shape {features.shape}"
        )
    return _nearest(features, model.centroids)[0]
