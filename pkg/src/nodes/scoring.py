"""
Scoring node: turns cached member predictions into one EvaluationReport per
cluster count ("flat" for the flat experiment, "mixed_k<k>" for mixed runs).

Individual rows come straight from the member columns. Ensemble rows aggregate
the member columns of each evaluation unit under the ensemble's rule. Within one
cluster, a per-cluster ensemble sees exactly the predictions its members make
there, so aggregating the routed member columns equals fitting the ensemble in
every cluster. Ensembles with a failed member are recorded, not scored.
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from src.ensemble import enumerate_ensembles, votes_from_columns
from src.evaluation import build_report, make_row
from src.nodes.training import cluster_counts, prediction_key
from src.state import ConfusionCounts, EnsembleSpec, ExperimentState, FailureRecord, MetricsRow, ReportRow
from src.tools.metrics import confusion, metrics

logger = logging.getLogger(__name__)


def report_key(k: int) -> str:
    return "flat" if k == 0 else f"mixed_k{k}"


def report_title(k: int) -> str:
    return "Flat experiment" if k == 0 else f"Mixed experiment, K-means k={k}"


def _score(fold_columns: Dict[str, np.ndarray], truth: Dict[str, np.ndarray]) -> tuple[MetricsRow, Dict[str, MetricsRow]]:
    per_fold: Dict[str, MetricsRow] = {}
    total: Optional[ConfusionCounts] = None
    for fold, predicted in fold_columns.items():
        counts = confusion(predicted, truth[fold])
        per_fold[fold] = metrics(counts)
        total = counts if total is None else total + counts
    return metrics(total), per_fold


def all_ensembles(state: ExperimentState) -> List[EnsembleSpec]:
    config = state["config"]
    specs: List[EnsembleSpec] = []
    for rule in config.rules:
        specs.extend(enumerate_ensembles(config.roster, rule))
    return specs


def evaluate_node(state: ExperimentState) -> dict:
    config = state["config"]
    truth = state["truth"]
    folds = [f.name for f in state["folds"]]
    predictions = state.get("predictions", {})
    ensembles = all_ensembles(state)

    reports = {}
    failures: List[FailureRecord] = []
    for k in cluster_counts(state):
        available = {
            acronym: predictions[prediction_key(acronym, k)].predicted
            for acronym in config.roster
            if prediction_key(acronym, k) in predictions
        }
        rows: List[ReportRow] = []
        for acronym, columns in available.items():
            aggregate, per_fold = _score(columns, truth)
            rows.append(make_row(acronym, aggregate, per_fold))

        for spec in ensembles:
            missing = [m for m in spec.members if m not in available]
            if missing:
                failures.append(FailureRecord(
                    stage="ensemble",
                    label=f"{spec.label} k={k}" if k else spec.label,
                    error=f"member(s) {missing} failed",
                ))
                continue
            columns = {
                fold: votes_from_columns(spec, {m: available[m][fold] for m in spec.members})
                for fold in folds
            }
            aggregate, per_fold = _score(columns, truth)
            rows.append(make_row(spec.label, aggregate, per_fold, composition=spec.composition, rule=spec.rule))

        reports[report_key(k)] = build_report(rows, report_title(k))
        logger.info("%s: %d rows scored", report_title(k), len(rows))

    return {"reports": reports, "artifacts": {"ensembles": ensembles}, "failures": failures}
