"""
Cluster-then-classify: K-means partitions the training set and one predictor is
fitted per cluster on that cluster's objects only. At prediction time every row
is routed to its nearest centroid and classified by that cluster's predictor.

A cluster that holds a single class, or (for k > 1) fewer than min_cluster_size
objects, gets a ConstantPredictor of its majority class instead of a fit.
"""

import logging
from typing import Any, List, Mapping, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, model_validator

from src.ensemble import predict_ensemble
from src.learners import fit_with_treatment
from src.learners.roster import spec_for
from src.state import ConstantPredictor, Dataset, EnsembleSpec, KMeansModel, ModelSpec
from src.tools.clustering import assign, fit_kmeans

logger = logging.getLogger(__name__)

DEFAULT_MIN_CLUSTER_SIZE = 10


class FittedEnsemble(BaseModel):
    """An EnsembleSpec together with its fitted members, in spec order."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: EnsembleSpec
    members: List[Any]

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_ensemble(self.spec, self.members, features)


class MixedModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kmeans: KMeansModel
    predictors: List[Any]
    cluster_sizes: List[int]
    cluster_fraud: List[int]

    @model_validator(mode="after")
    def _one_predictor_per_cluster(self) -> "MixedModel":
        k = self.kmeans.k
        if not (len(self.predictors) == len(self.cluster_sizes) == len(self.cluster_fraud) == k):
            raise ValueError(f"expected exactly {k} per-cluster predictors and summaries")
        return self

    @property
    def k(self) -> int:
        return self.kmeans.k

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict_mixed(self, features)


def _majority_label(genuine: int, fraud: int) -> int:
    # ties go to fraud, matching the KNN vote tie-break
    return 1 if fraud >= genuine else 0


def _fit_cluster_predictor(
    cluster: Dataset,
    template: ModelSpec | EnsembleSpec,
    member_specs: Mapping[str, ModelSpec],
    rebalance: bool,
) -> Any:
    if isinstance(template, ModelSpec):
        return fit_with_treatment(template, cluster, rebalance_classical=rebalance)
    members = [fit_with_treatment(member_specs[name], cluster, rebalance_classical=rebalance) for name in template.members]
    return FittedEnsemble(spec=template, members=members)


def _constant_reason(genuine: int, fraud: int, size: int, k: int, min_cluster_size: int) -> Optional[str]:
    if size == 0:
        return "empty_cluster"
    if genuine == 0 or fraud == 0:
        return "single_class_cluster"
    if k > 1 and size < min_cluster_size:
        return "below_min_size"
    return None


def fit_mixed(
    train: Dataset,
    k: int,
    template: ModelSpec | EnsembleSpec,
    seed: int,
    rebalance: bool = True,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    member_specs: Optional[Mapping[str, ModelSpec]] = None,
    kmeans: Optional[KMeansModel] = None,
    n_jobs: int = 1,
) -> MixedModel:
    """
    Fit K-means (unless a fitted kmeans is passed in) and one predictor per cluster.

    Ensemble templates resolve their members through member_specs (acronym -> spec);
    members not listed there use roster defaults with the given seed.
    """
    if kmeans is None:
        kmeans = fit_kmeans(train, k, seed)
    elif kmeans.k != k:
        raise ValueError(f"shared K-means has k={kmeans.k}, expected {k}")

    if isinstance(template, EnsembleSpec):
        resolved = dict(member_specs or {})
        for name in template.members:
            resolved.setdefault(name, spec_for(name, seed))
        member_specs = resolved
    else:
        member_specs = {}

    labels = assign(kmeans, train.features)
    genuine_all, fraud_all = train.class_counts()
    clusters = [train.subset(np.flatnonzero(labels == c)) for c in range(k)]

    jobs: List[tuple[int, Dataset]] = []
    predictors: List[Any] = [None] * k
    for c, cluster in enumerate(clusters):
        genuine, fraud = cluster.class_counts()
        reason = _constant_reason(genuine, fraud, cluster.n_objects, k, min_cluster_size)
        if reason is None:
            jobs.append((c, cluster))
            continue
        label = _majority_label(genuine_all, fraud_all) if reason == "empty_cluster" else _majority_label(genuine, fraud)
        predictors[c] = ConstantPredictor(label=label, reason=reason)
        logger.warning(
            "cluster %d/%d (%d objects, %d fraud): %s, predicting %d",
            c, k, cluster.n_objects, fraud, reason, label,
        )

    if n_jobs == 1:
        fitted = [_fit_cluster_predictor(cluster, template, member_specs, rebalance) for _, cluster in jobs]
    else:
        fitted = Parallel(n_jobs=n_jobs)(
            delayed(_fit_cluster_predictor)(cluster, template, member_specs, rebalance) for _, cluster in jobs
        )
    for (c, _), predictor in zip(jobs, fitted):
        predictors[c] = predictor

    return MixedModel(
        kmeans=kmeans,
        predictors=predictors,
        cluster_sizes=[c.n_objects for c in clusters],
        cluster_fraud=[c.class_counts()[1] for c in clusters],
    )


def predict_mixed(model: MixedModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    routes = assign(model.kmeans, features)
    result = np.zeros(routes.shape[0], dtype=np.int64)
    for c, predictor in enumerate(model.predictors):
        rows = np.flatnonzero(routes == c)
        if rows.size:
            result[rows] = predictor.predict(features[rows])
    return result


def predictor_kind(predictor: Any) -> str:
    if isinstance(predictor, ConstantPredictor):
        return f"constant({predictor.label}, {predictor.reason})"
    if isinstance(predictor, FittedEnsemble):
        return predictor.spec.label
    return predictor.spec.acronym


def cluster_summary(model: MixedModel) -> pd.DataFrame:
    return pd.DataFrame({
        "cluster": range(model.k),
        "size": model.cluster_sizes,
        "fraud_count": model.cluster_fraud,
        "predictor_kind": [predictor_kind(p) for p in model.predictors],
    })
