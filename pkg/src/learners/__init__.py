"""
Learner families behind one fit/predict contract.

    fit_classifier(spec, train) -> FittedClassifier
    predict(model, features)       -> hard labels in {0, 1}
    predict_score(model, features) -> scores in [0, 1]; predict == (score >= 0.5)
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import joblib
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.errors import DatasetError
from src.learners.base import (
    DECISION_THRESHOLD,
    ConstantClassifier,
    FittedClassifier,
    compute_class_weights,
)
from src.learners.bayes import fit_naive_bayes
from src.learners.boosting import fit_gradient_boosting
from src.learners.forest import fit_random_forest
from src.learners.knn import fit_knn
from src.learners.logistic import fit_logistic
from src.learners.mlp import fit_mlp
from src.state import ConstantPredictor, Dataset, ModelSpec, ScalerParams
from src.tools.dataset import apply_scaler, rebalance

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 2

_FITTERS: Dict[str, Callable[[ModelSpec, Dataset], FittedClassifier]] = {
    "KNN": fit_knn,
    "NB": fit_naive_bayes,
    "LR": fit_logistic,
    "RF": fit_random_forest,
    "GBT": fit_gradient_boosting,
    "MLP": fit_mlp,
}

__all__ = [
    "DECISION_THRESHOLD",
    "FittedClassifier",
    "ModelBundle",
    "compute_class_weights",
    "fit_classifier",
    "fit_with_treatment",
    "load_bundle",
    "load_model",
    "predict",
    "predict_score",
    "save_model",
]


def fit_classifier(spec: ModelSpec, train: Dataset) -> FittedClassifier:
    if train.n_objects == 0:
        raise DatasetError(f"{spec.acronym}: cannot fit on an empty training set")

    genuine, fraud = train.class_counts()
    if genuine == 0 or fraud == 0:
        if spec.variant == "class_weighted":
            raise DatasetError(f"{spec.acronym}: class-weighted fit needs both classes present")
        label = 1 if fraud else 0
        logger.warning("%s: single-class training data, predicting %d everywhere", spec.acronym, label)
        return ConstantClassifier(
            spec=spec, n_features=train.n_features, prior_counts=(genuine, fraud), label=label
        )

    return _FITTERS[spec.family](spec, train)


def fit_with_treatment(spec: ModelSpec, train: Dataset, rebalance_classical: bool = True) -> FittedClassifier:
    """
    Fit with the imbalance treatment of the model variant: classical learners see
    the rebalanced set, class-weighted learners the original one.
    """
    if spec.variant == "classical" and rebalance_classical:
        genuine, fraud = train.class_counts()
        if genuine and fraud:
            train = rebalance(train, seed=spec.seed)
    return fit_classifier(spec, train)


def predict(model: FittedClassifier | ConstantPredictor, features: Any) -> np.ndarray:
    return model.predict(features)


def predict_score(model: FittedClassifier | ConstantPredictor, features: Any) -> np.ndarray:
    return model.predict_score(features)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


class ModelBundle(BaseModel):
    """A fitted classifier plus the preprocessing its inputs went through."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: Any
    input_features: List[str] = Field(default_factory=list)
    scaler: Optional[ScalerParams] = None
    scaler_features: List[str] = Field(default_factory=list)

    def prepare(self, data: Dataset) -> np.ndarray:
        """Raw dataset columns -> the scaled, selected matrix the model was trained on."""
        if not self.input_features:
            return data.features
        wanted = self.scaler_features if self.scaler is not None else self.input_features
        missing = [name for name in wanted if name not in data.feature_names]
        if missing:
            raise DatasetError(f"{self.model.spec.acronym}: dataset lacks feature column(s) {missing}")
        position = {name: j for j, name in enumerate(data.feature_names)}
        frame = Dataset(
            features=data.features[:, [position[name] for name in wanted]],
            labels=data.labels,
            feature_names=list(wanted),
        )
        if self.scaler is not None:
            frame = apply_scaler(self.scaler, frame)
            frame = frame.select_columns(np.isin(frame.feature_names, self.input_features))
        return frame.features


def save_model(
    model: FittedClassifier,
    path: str | Path,
    input_features: Sequence[str] = (),
    scaler: Optional[ScalerParams] = None,
    scaler_features: Sequence[str] = (),
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bundle = ModelBundle(
        model=model,
        input_features=list(input_features),
        scaler=scaler,
        scaler_features=list(scaler_features),
    )
    joblib.dump({"format_version": MODEL_FORMAT_VERSION, "bundle": bundle}, path)
    logger.info("Saved %s to %s", model.spec.acronym, path)
    return path


def load_bundle(path: str | Path) -> ModelBundle:
    payload = joblib.load(Path(path))
    if not isinstance(payload, dict) or payload.get("format_version") != MODEL_FORMAT_VERSION:
        found = payload.get("format_version") if isinstance(payload, dict) else None
        raise ValueError(
            f"unsupported model file {path}: format version {found!r}, expected {MODEL_FORMAT_VERSION}"
        )
    return payload["bundle"]


def load_model(path: str | Path) -> FittedClassifier:
    return load_bundle(path).model
