"""
Data layer nodes.

  load_node:        read the training CSV and the optional validation CSV
  preprocess_node:  global min-max scaling, feature selection, evaluation folds

Neither node raises: a data problem becomes a FailureRecord and the router sends
the run to the failure terminal.
"""

import logging

import numpy as np

from src.errors import DatasetError
from src.evaluation import make_folds
from src.state import ExperimentState, FailureRecord, ModelSpec
from src.tools.dataset import apply_scaler, fit_scaler, load_csv
from src.tools.feature_select import select_features

logger = logging.getLogger(__name__)


def load_node(state: ExperimentState) -> dict:
    config = state["config"]
    try:
        if not config.data:
            raise DatasetError("no training dataset given (--data or data= in the config file)")
        train = load_csv(config.data, config.label_column, config.exclude_columns)
        validation = None
        if config.validation:
            validation = load_csv(config.validation, config.label_column, config.exclude_columns)
            if validation.feature_names != train.feature_names:
                raise DatasetError(
                    f"validation columns {validation.feature_names} differ from training columns {train.feature_names}"
                )
    except Exception as exc:
        logger.error("load failed: %s", exc)
        return {"train": None, "validation": None, "failures": [FailureRecord(stage="load", label="dataset", error=str(exc))]}

    return {"train": train, "validation": validation}


def preprocess_node(state: ExperimentState) -> dict:
    config = state["config"]
    seed = config.seed or 0
    train, validation = state["train"], state["validation"]
    try:
        scaler = fit_scaler(train)
        train = apply_scaler(scaler, train)
        validation = apply_scaler(scaler, validation) if validation is not None else None

        verdict = None
        if config.select_features:
            verdict = select_features(train, bins=config.mi_bins, forest_config=ModelSpec(family="RF", seed=seed), seed=seed)
            train = train.select_columns(verdict.relevant)
            if validation is not None:
                validation = validation.select_columns(verdict.relevant)

        folds = make_folds(train, validation, config.folds, seed)
    except Exception as exc:
        logger.error("preprocessing failed: %s", exc)
        return {"folds": [], "failures": [FailureRecord(stage="preprocess", label="dataset", error=str(exc))]}

    truth = {}
    for fold in folds:
        truth[fold.name] = validation.labels if fold.test_indices is None else train.labels[fold.test_indices]

    logger.info(
        "preprocessed: %d objects x %d features, %d evaluation unit(s)",
        train.n_objects, train.n_features, len(folds),
    )
    return {
        "train": train,
        "validation": validation,
        "verdict": verdict,
        "folds": folds,
        "truth": {name: np.asarray(labels) for name, labels in truth.items()},
        # saved models carry the global scaling so raw files can be scored later
        "artifacts": {"scaler": scaler, "scaler_features": list(state["train"].feature_names)},
    }
