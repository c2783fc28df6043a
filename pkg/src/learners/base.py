"""
Shared fit/predict contract for every learner family.

A FittedClassifier is frozen after fitting. predict(x) == 1 iff predict_score(x) >= 0.5,
for every family, so hard labels and scores can never disagree.
"""

from typing import Any, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.errors import DatasetError, DimensionMismatchError, HyperparameterError
from src.state import ClassWeights, ModelSpec

DECISION_THRESHOLD = 0.5


def compute_class_weights(labels: np.ndarray) -> ClassWeights:
    """w_c = n / (2 * n_c), so that n_0 * w_0 + n_1 * w_1 = n."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    n1 = int((labels == 1).sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DatasetError("class weights need both classes present")
    return ClassWeights(w0=n / (2.0 * n0), w1=n / (2.0 * n1))


def sample_weights(spec: ModelSpec, labels: np.ndarray) -> Tuple[ClassWeights, np.ndarray]:
    """Class weights for the modified variant, unit weights for the classical one."""
    if spec.variant == "class_weighted":
        weights = compute_class_weights(labels)
    else:
        weights = ClassWeights(w0=1.0, w1=1.0)
    return weights, weights.for_labels(labels)


def positive_int(spec: ModelSpec, name: str) -> int:
    value = spec.param(name)
    if value is None or int(value) != value or int(value) < 1:
        raise HyperparameterError(f"{spec.acronym}: '{name}' must be a positive integer, got {value!r}")
    return int(value)


def optional_positive_int(spec: ModelSpec, name: str) -> int | None:
    if spec.param(name) is None:
        return None
    return positive_int(spec, name)


def non_negative_float(spec: ModelSpec, name: str, strictly_positive: bool = False) -> float:
    value = spec.param(name)
    if value is None:
        raise HyperparameterError(f"{spec.acronym}: '{name}' must be set")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strictly_positive and value == 0):
        raise HyperparameterError(f"{spec.acronym}: invalid value {value!r} for '{name}'")
    return value


class FittedClassifier(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: ModelSpec
    n_features: int
    prior_counts: Tuple[int, int]

    def _check_features(self, features: Any) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, self.n_features)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"{self.spec.acronym} was fitted on {self.n_features} features, "
                f"got input of shape {features.shape}"
            )
        return features

    def _score(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_score(self, features: Any) -> np.ndarray:
        features = self._check_features(features)
        if features.shape[0] == 0:
            return np.zeros(0, dtype=np.float64)
        return self._score(features)

    def predict(self, features: Any) -> np.ndarray:
        return (self.predict_score(features) >= DECISION_THRESHOLD).astype(np.int64)


class ConstantClassifier(FittedClassifier):
    """Classical learner fitted on single-class data: always predicts that class."""

    label: int

    def _score(self, features: np.ndarray) -> np.ndarray:
        return np.full(features.shape[0], float(self.label))
