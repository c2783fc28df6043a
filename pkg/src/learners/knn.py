"""
K-nearest neighbors with Euclidean distance.

The modified variant weights each neighbor's vote by the class weight of its label.
Ties (equal vote mass, or equal distances at the K-th position) resolve toward fraud:
among neighbors tied at the K-th distance, fraud objects are taken first, and a score
of exactly 0.5 predicts fraud.
"""

import logging

import numpy as np

from src.learners.base import FittedClassifier, positive_int, sample_weights
from src.state import ClassWeights, Dataset, ModelSpec

logger = logging.getLogger(__name__)

# Upper bound on query_rows * train_rows per distance block.
_BLOCK_CELLS = 4_000_000


def squared_distances(queries: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distances, accumulated feature by feature."""
    out = np.zeros((queries.shape[0], reference.shape[0]), dtype=np.float64)
    for j in range(queries.shape[1]):
        diff = queries[:, j, None] - reference[None, :, j]
        out += diff * diff
    return out


class KNNClassifier(FittedClassifier):
    train_features: np.ndarray
    train_labels: np.ndarray
    weights: ClassWeights
    n_neighbors: int

    def _score(self, features: np.ndarray) -> np.ndarray:
        n_train = self.train_features.shape[0]
        block = max(1, _BLOCK_CELLS // max(n_train, 1))
        scores = np.empty(features.shape[0], dtype=np.float64)
        is_fraud = self.train_labels == 1
        k = self.n_neighbors

        for start in range(0, features.shape[0], block):
            d2 = squared_distances(features[start:start + block], self.train_features)
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1, None]

            closer = d2 < kth
            tied = d2 == kth
            remaining = k - closer.sum(axis=1)
            tied_fraud = (tied & is_fraud).sum(axis=1)
            take_fraud = np.minimum(remaining, tied_fraud)
            take_genuine = remaining - take_fraud

            fraud_votes = ((closer & is_fraud).sum(axis=1) + take_fraud) * self.weights.w1
            genuine_votes = ((closer & ~is_fraud).sum(axis=1) + take_genuine) * self.weights.w0
            scores[start:start + block] = fraud_votes / (fraud_votes + genuine_votes)

        return scores


def fit_knn(spec: ModelSpec, train: Dataset) -> KNNClassifier:
    n_neighbors = positive_int(spec, "n_neighbors")
    if n_neighbors > train.n_objects:
        logger.warning(
            "%s: n_neighbors=%d exceeds %d training objects; using all of them",
            spec.acronym, n_neighbors, train.n_objects,
        )
        n_neighbors = train.n_objects
    weights, _ = sample_weights(spec, train.labels)
    return KNNClassifier(
        spec=spec,
        n_features=train.n_features,
        prior_counts=train.class_counts(),
        train_features=train.features.copy(),
        train_labels=train.labels.copy(),
        weights=weights,
        n_neighbors=n_neighbors,
    )
