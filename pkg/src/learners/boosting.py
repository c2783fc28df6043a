"""
Gradient-boosted trees with logistic loss.

Each round fits a depth-limited regression tree to the residuals y - p (weighted by
the per-object class weight), replaces its leaf values by one Newton step
sum(w * r) / sum(w * p * (1 - p)), and adds it with shrinkage `learning_rate`.
When a full step would raise the training loss the step is halved until it does
not, so the recorded loss trace is non-increasing.
"""

import logging
from typing import List

import numpy as np
from scipy.special import expit

from src.errors import OptimizationError
from src.learners.base import FittedClassifier, non_negative_float, positive_int, sample_weights
from src.learners.trees import DecisionTree, grow_tree, name_order
from src.state import Dataset, ModelSpec

logger = logging.getLogger(__name__)

_MAX_HALVINGS = 30
_MIN_HESSIAN = 1e-12


def weighted_logistic_loss(raw: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Weighted mean of log(1 + e^F) - y * F."""
    return float(np.dot(w, np.logaddexp(0.0, raw) - y * raw) / w.sum())


class GradientBoostingClassifier(FittedClassifier):
    init_raw: float
    trees: List[DecisionTree]
    steps: List[float]
    loss_trace: List[float]

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        raw = np.full(features.shape[0], self.init_raw)
        for tree, step in zip(self.trees, self.steps):
            if step:
                raw += step * tree.predict_value(features)
        return raw

    def _score(self, features: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(features))


def fit_gradient_boosting(spec: ModelSpec, train: Dataset) -> GradientBoostingClassifier:
    n_rounds = positive_int(spec, "n_rounds")
    learning_rate = non_negative_float(spec, "learning_rate", strictly_positive=True)
    max_depth = positive_int(spec, "max_depth")
    min_samples_leaf = positive_int(spec, "min_samples_leaf")

    _, w = sample_weights(spec, train.labels)
    X = train.features
    y = train.labels.astype(np.float64)
    rng = np.random.default_rng(spec.seed)
    visit_order = name_order(train.feature_names)

    init_raw = float(np.log(np.dot(w, y) / np.dot(w, 1.0 - y)))
    raw = np.full(train.n_objects, init_raw)
    loss = weighted_logistic_loss(raw, y, w)
    trace = [loss]
    trees: List[DecisionTree] = []
    steps: List[float] = []

    for round_index in range(n_rounds):
        p = expit(raw)
        residual = y - p
        tree, _ = grow_tree(
            X, residual, w, criterion="sse", rng=rng,
            max_depth=max_depth, min_samples_leaf=min_samples_leaf, visit_order=visit_order,
        )

        leaves = tree.apply(X)
        numerator = np.bincount(leaves, weights=w * residual, minlength=tree.n_nodes)
        hessian = np.bincount(leaves, weights=w * p * (1.0 - p), minlength=tree.n_nodes)
        newton = numerator / np.maximum(hessian, _MIN_HESSIAN)
        tree = tree.with_leaf_values(newton)
        update = newton[leaves]

        step = learning_rate
        for _ in range(_MAX_HALVINGS):
            candidate = weighted_logistic_loss(raw + step * update, y, w)
            if not np.isfinite(candidate):
                raise OptimizationError(f"{spec.acronym}: non-finite loss in round {round_index}")
            if candidate <= loss:
                break
            step *= 0.5
        else:
            step, candidate = 0.0, loss

        raw = raw + step * update
        loss = candidate
        trees.append(tree)
        steps.append(step)
        trace.append(loss)

    return GradientBoostingClassifier(
        spec=spec,
        n_features=train.n_features,
        prior_counts=train.class_counts(),
        init_raw=init_raw,
        trees=trees,
        steps=steps,
        loss_trace=trace,
    )
