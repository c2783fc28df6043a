"""
Random forest: bootstrap-sampled Gini trees with ceil(sqrt(d)) candidate features
per split, combined by a (class-weighted) majority vote among all trees.
"""

import logging
import math
from typing import List

import numpy as np

from src.learners.base import FittedClassifier, optional_positive_int, positive_int, sample_weights
from src.learners.trees import DecisionTree, grow_tree, name_order
from src.state import ClassWeights, Dataset, ModelSpec

logger = logging.getLogger(__name__)


class RandomForestClassifier(FittedClassifier):
    trees: List[DecisionTree]
    weights: ClassWeights
    importances: np.ndarray
    any_split: bool

    def tree_votes(self, features: np.ndarray) -> np.ndarray:
        """(n_trees, n) matrix of per-tree hard votes; a leaf at exactly 0.5 votes fraud."""
        return np.vstack([(tree.predict_value(features) >= 0.5) for tree in self.trees]).astype(np.int64)

    def _score(self, features: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(features)
        fraud = votes.sum(axis=0) * self.weights.w1
        genuine = (votes.shape[0] - votes.sum(axis=0)) * self.weights.w0
        return fraud / (fraud + genuine)


def fit_random_forest(spec: ModelSpec, train: Dataset) -> RandomForestClassifier:
    n_trees = positive_int(spec, "n_trees")
    max_depth = optional_positive_int(spec, "max_depth")
    min_samples_leaf = positive_int(spec, "min_samples_leaf")
    max_features = optional_positive_int(spec, "max_features")
    if max_features is None:
        max_features = max(1, math.ceil(math.sqrt(train.n_features)))

    weights, w = sample_weights(spec, train.labels)
    y = train.labels.astype(np.float64)
    rng = np.random.default_rng(spec.seed)
    n, d = train.n_objects, train.n_features
    visit_order = name_order(train.feature_names)

    trees: List[DecisionTree] = []
    importance_sum = np.zeros(d, dtype=np.float64)
    any_split = False
    for _ in range(n_trees):
        rows = rng.integers(0, n, size=n)
        tree, decrease = grow_tree(
            train.features[rows],
            y[rows],
            w[rows],
            criterion="gini",
            rng=rng,
            max_depth=max_depth,
            min_samples_leaf=min_samples_leaf,
            max_features=max_features,
            visit_order=visit_order,
        )
        trees.append(tree)
        total = decrease.sum()
        if total > 0:
            importance_sum += decrease / total
            any_split = True

    if any_split:
        importances = importance_sum / importance_sum.sum()
    else:
        logger.warning("%s: no tree made a split; feature importances are uniform", spec.acronym)
        importances = np.full(d, 1.0 / d) if d else np.zeros(0)

    return RandomForestClassifier(
        spec=spec,
        n_features=d,
        prior_counts=train.class_counts(),
        trees=trees,
        weights=weights,
        importances=importances,
        any_split=any_split,
    )
