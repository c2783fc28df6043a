"""
Training layer nodes.

tune_node picks hyperparameters per roster model by holdout F1 search, or takes
them from the tuned_models.txt of an earlier run when config.specs names one.
predictions_node fits every roster model once per (k, evaluation unit) and caches
its hard predictions; ensembles are later scored from these cached columns, so a
member is never refitted for the thousands of ensembles that contain it.

k=0 stands for the flat experiment (no clustering). For k >= 1 the K-means model
is fitted once per (k, unit) and shared by every roster model.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.config import grids_for, read_specs
from src.evaluation import holdout_search, materialize_fold
from src.learners import fit_with_treatment
from src.learners.roster import spec_for
from src.mixed import cluster_summary, fit_mixed
from src.state import Dataset, ExperimentState, FailureRecord, KMeansModel, MemberPredictions, ModelSpec
from src.tools.clustering import fit_kmeans

logger = logging.getLogger(__name__)


def cluster_counts(state: ExperimentState) -> List[int]:
    return [0] if state["mode"] == "flat" else list(state["config"].k_values)


def prediction_key(acronym: str, k: int) -> str:
    return f"{acronym}@{k}"


# ---------------------------------------------------------------------------
# Hyperparameter search
# ---------------------------------------------------------------------------


def tune_node(state: ExperimentState) -> dict:
    config = state["config"]
    seed = config.seed or 0
    grids = grids_for(config)["grids"]
    # a missing or malformed spec file is a config error and stops the run
    reused = read_specs(config.specs) if config.specs else {}
    tuned: Dict[str, ModelSpec] = {}
    failures: List[FailureRecord] = []

    for acronym in config.roster:
        if acronym in reused:
            tuned[acronym] = reused[acronym]
            continue
        base = spec_for(acronym, seed)
        grid = grids.get(base.family)
        if not config.search or not grid:
            tuned[acronym] = base
            continue
        try:
            result = holdout_search(
                grid, base, state["train"], config.test_fraction, seed,
                rebalance=config.rebalance, n_jobs=config.jobs,
            )
            tuned[acronym] = result.best
        except Exception as exc:
            # search failure falls back to the family defaults
            logger.warning("%s: hyperparameter search failed, using defaults: %s", acronym, exc)
            failures.append(FailureRecord(stage="tune", label=acronym, error=str(exc)))
            tuned[acronym] = base

    return {"tuned": tuned, "failures": failures}


# ---------------------------------------------------------------------------
# Member predictions
# ---------------------------------------------------------------------------


def _member_column(
    acronym: str,
    spec: ModelSpec,
    fit_part: Dataset,
    test_part: Dataset,
    k: int,
    kmeans: Optional[KMeansModel],
    rebalance: bool,
    min_cluster_size: int,
) -> Tuple[str, Optional[np.ndarray], Optional[pd.DataFrame], Optional[str]]:
    try:
        if k == 0:
            model = fit_with_treatment(spec, fit_part, rebalance_classical=rebalance)
            return acronym, model.predict(test_part.features), None, None
        mixed = fit_mixed(
            fit_part, k, spec, spec.seed,
            rebalance=rebalance, min_cluster_size=min_cluster_size, kmeans=kmeans,
        )
        summary = cluster_summary(mixed)
        summary.insert(0, "model", acronym)
        return acronym, mixed.predict(test_part.features), summary, None
    except Exception as exc:
        return acronym, None, None, f"{type(exc).__name__}: {exc}"


def predictions_node(state: ExperimentState) -> dict:
    config = state["config"]
    seed = config.seed or 0
    train, validation = state["train"], state["validation"]
    tuned = state["tuned"]
    roster = [a for a in config.roster if a in tuned]

    predicted: Dict[Tuple[str, int], Dict[str, np.ndarray]] = {}
    failed: Dict[Tuple[str, int], str] = {}
    kmeans_models: Dict[int, KMeansModel] = {}
    cluster_tables: Dict[int, pd.DataFrame] = {}
    failures: List[FailureRecord] = []

    for k in cluster_counts(state):
        for position, fold in enumerate(state["folds"]):
            fit_part, test_part = materialize_fold(fold, train, validation)
            kmeans = None
            if k:
                try:
                    kmeans = fit_kmeans(fit_part, k, seed)
                except Exception as exc:
                    for acronym in roster:
                        failed.setdefault((acronym, k), f"K-means ({fold.name}): {exc}")
                    continue

            jobs = [
                delayed(_member_column)(
                    a, tuned[a], fit_part, test_part, k, kmeans, config.rebalance, config.min_cluster_size
                )
                for a in roster
                if (a, k) not in failed
            ]
            results = Parallel(n_jobs=config.jobs)(jobs) if jobs else []

            summaries = []
            for acronym, column, summary, error in results:
                if error is not None:
                    failed[(acronym, k)] = f"{fold.name}: {error}"
                    continue
                predicted.setdefault((acronym, k), {})[fold.name] = column
                if summary is not None:
                    summaries.append(summary)
            if position == 0 and kmeans is not None:
                kmeans_models[k] = kmeans
                if summaries:
                    cluster_tables[k] = pd.concat(summaries, ignore_index=True)

        cached = sum(1 for a in roster if (a, k) in predicted and (a, k) not in failed)
        logger.info("k=%d: member predictions cached for %d of %d model(s)", k, cached, len(roster))

    for (acronym, k), error in sorted(failed.items()):
        logger.warning("%s (k=%d) failed: %s", acronym, k, error)
        failures.append(FailureRecord(stage="fit", label=f"{acronym} k={k}" if k else acronym, error=error))

    predictions = {
        prediction_key(acronym, k): MemberPredictions(acronym=acronym, k=k, predicted=columns)
        for (acronym, k), columns in predicted.items()
        if (acronym, k) not in failed
    }
    artifacts: Dict[str, Any] = {}
    if kmeans_models:
        artifacts["kmeans"] = kmeans_models
        artifacts["clusters"] = cluster_tables
    return {"predictions": predictions, "artifacts": artifacts, "failures": failures}
