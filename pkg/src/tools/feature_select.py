"""
Feature relevance by majority vote over three scorers: |Pearson r| with the label,
binned mutual information with the label, and random-forest impurity importance.

A method votes feature j relevant when its score is strictly above that method's
mean score. Relevant = at least 2 of 3 votes. An empty mask is replaced by the
single feature with the highest summed rank across the three methods.
"""

import logging

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from src.errors import DatasetError, HyperparameterError
from src.learners import fit_classifier
from src.state import Dataset, FeatureVerdict, ModelSpec

logger = logging.getLogger(__name__)

DEFAULT_BINS = 10


def _require_both_classes(data: Dataset, what: str) -> None:
    genuine, fraud = data.class_counts()
    if genuine == 0 or fraud == 0:
        raise DatasetError(f"{what} needs both classes present in the labels")


def pearson_scores(data: Dataset) -> np.ndarray:
    if data.n_objects < 2:
        raise DatasetError("Pearson correlation needs at least 2 objects")
    _require_both_classes(data, "Pearson correlation")

    X = data.features
    y = data.labels.astype(np.float64)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    x_norm = np.sqrt(np.sum(xc * xc, axis=0))
    y_norm = np.sqrt(np.dot(yc, yc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (xc.T @ yc) / (x_norm * y_norm)
    r = np.where(x_norm > 0, np.abs(r), 0.0)
    return np.clip(r, 0.0, 1.0)


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def mutual_information_scores(data: Dataset, bins: int = DEFAULT_BINS) -> np.ndarray:
    """I(binned feature; label) in bits with equal-width bins over the observed range."""
    if bins < 2:
        raise HyperparameterError(f"mutual information needs at least 2 bins, got {bins}")
    y = data.labels
    scores = np.zeros(data.n_features, dtype=np.float64)
    if data.n_objects == 0:
        return scores
    h_y = _entropy_bits(np.bincount(y, minlength=2))

    for j in range(data.n_features):
        column = data.features[:, j]
        lo, hi = column.min(), column.max()
        if lo == hi:
            continue
        binned = np.minimum(((column - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
        joint = np.zeros((bins, 2), dtype=np.float64)
        np.add.at(joint, (binned, y), 1.0)
        mi = _entropy_bits(joint.sum(axis=1)) + h_y - _entropy_bits(joint.ravel())
        scores[j] = max(mi, 0.0)
    return scores


def importance_scores(data: Dataset, forest_config: ModelSpec, seed: int) -> tuple[np.ndarray, bool]:
    """
    Mean impurity-decrease importance from a forest fitted on data.

    Returns (scores, degenerate). Scores sum to 1; degenerate=True means no tree
    split and the scores are uniform.
    """
    if forest_config.family != "RF":
        raise HyperparameterError(f"feature importance needs a random-forest spec, got {forest_config.family}")
    spec = forest_config.model_copy(update={"seed": seed})
    forest = fit_classifier(spec, data)
    importances = getattr(forest, "importances", None)
    if importances is None:
        # single-class data yields a constant classifier: nothing to split on
        logger.warning("feature importance: no split possible, using uniform scores")
        return np.full(data.n_features, 1.0 / data.n_features), True
    return np.asarray(importances, dtype=np.float64), not forest.any_split


def select_features(
    data: Dataset,
    bins: int = DEFAULT_BINS,
    forest_config: ModelSpec | None = None,
    seed: int = 0,
) -> FeatureVerdict:
    forest_config = forest_config or ModelSpec(family="RF", seed=seed)

    pearson = pearson_scores(data)
    mi = mutual_information_scores(data, bins)
    importance, degenerate = importance_scores(data, forest_config, seed)

    vote_p = pearson > pearson.mean()
    vote_mi = mi > mi.mean()
    vote_fi = importance > importance.mean()
    relevant = (vote_p.astype(int) + vote_mi.astype(int) + vote_fi.astype(int)) >= 2

    forced = False
    if not relevant.any():
        rank_sum = rankdata(pearson) + rankdata(mi) + rankdata(importance)
        # ties go to the first feature by name
        best = min(np.flatnonzero(rank_sum == rank_sum.max()), key=lambda j: data.feature_names[j])
        relevant = np.zeros(data.n_features, dtype=bool)
        relevant[best] = True
        forced = True
        logger.warning(
            "feature selection: no feature won a majority; keeping '%s' by rank sum",
            data.feature_names[best],
        )

    logger.info("feature selection: %d of %d features relevant", int(relevant.sum()), data.n_features)
    return FeatureVerdict(
        feature_names=list(data.feature_names),
        pearson=pearson,
        mutual_information=mi,
        importance=importance,
        vote_pearson=vote_p,
        vote_mutual_information=vote_mi,
        vote_importance=vote_fi,
        relevant=relevant,
        forced=forced,
        importance_degenerate=degenerate,
    )


def verdict_table(verdict: FeatureVerdict) -> pd.DataFrame:
    return pd.DataFrame({
        "feature_name": verdict.feature_names,
        "pearson": verdict.pearson,
        "mi": verdict.mutual_information,
        "importance": verdict.importance,
        "vote_p": verdict.vote_pearson,
        "vote_mi": verdict.vote_mutual_information,
        "vote_fi": verdict.vote_importance,
        "relevant": verdict.relevant,
    })
