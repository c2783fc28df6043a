"""
Output nodes.

report_node writes every report plus the side tables and the run manifest, and
with save_models also fits each tuned model on the whole training set and saves
it to models/<acronym>.joblib.
failure_node is the terminal for runs stopped before evaluation and writes the
manifest only.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from src.config import config_hash, grids_for, specs_to_lines
from src.learners import fit_with_treatment, save_model
from src.nodes.training import cluster_counts
from src.reporting import (
    composition_frame,
    render_centroids,
    write_frame,
    write_manifest,
    write_report,
    write_text,
)
from src.state import ExperimentState, FailureRecord, ModelSpec
from src.tools.feature_select import verdict_table

logger = logging.getLogger(__name__)


def _manifest(state: ExperimentState, files: List[str], extra_failures: Sequence[FailureRecord] = ()) -> str:
    config = state["config"]
    reports = state.get("reports", {})
    return write_manifest(
        config.out,
        command=state["mode"],
        config=config.model_dump(mode="json"),
        config_hash=config_hash(config),
        seed=config.seed,
        grids_version=grids_for(config)["version"],
        files=files,
        failures=list(state.get("failures", [])) + list(extra_failures),
        counts={name: len(report.rows) for name, report in sorted(reports.items())},
    )


def _save_models(state: ExperimentState, ordered: Dict[str, ModelSpec]) -> Tuple[List[str], List[FailureRecord]]:
    """Fit each tuned model on the whole preprocessed training set and save it under models/."""
    config = state["config"]
    train = state["train"]
    artifacts = state.get("artifacts", {})
    files: List[str] = []
    failures: List[FailureRecord] = []
    for acronym, spec in ordered.items():
        try:
            model = fit_with_treatment(spec, train, rebalance_classical=config.rebalance)
            path = save_model(
                model,
                Path(config.out) / "models" / f"{acronym}.joblib",
                input_features=train.feature_names,
                scaler=artifacts.get("scaler"),
                scaler_features=artifacts.get("scaler_features", ()),
            )
            files.append(str(path))
        except Exception as exc:
            logger.error("%s: could not save the fitted model: %s", acronym, exc)
            failures.append(FailureRecord(stage="save", label=acronym, error=str(exc)))
    return files, failures


def report_node(state: ExperimentState) -> dict:
    config = state["config"]
    out = Path(config.out)
    artifacts = state.get("artifacts", {})
    files: List[str] = []
    save_failures: List[FailureRecord] = []

    for name, report in state.get("reports", {}).items():
        files += write_report(report, out, name, config.top_ensembles)

    ensembles = artifacts.get("ensembles", [])
    if ensembles:
        files.append(write_frame(out / "ensembles.csv", composition_frame(ensembles)))

    verdict = state.get("verdict")
    if verdict is not None:
        files.append(write_frame(out / "feature_selection.csv", verdict_table(verdict)))

    tuned = state.get("tuned", {})
    if tuned:
        ordered = {a: tuned[a] for a in config.roster if a in tuned}
        files.append(write_text(out / "tuned_models.txt", "\n".join(specs_to_lines(ordered))))
        if config.save_models:
            saved, save_failures = _save_models(state, ordered)
            files += saved

    feature_names = state["train"].feature_names
    for k in cluster_counts(state):
        kmeans = artifacts.get("kmeans", {}).get(k)
        if kmeans is not None:
            files.append(write_text(out / f"centroids_k{k}.txt", render_centroids(kmeans, feature_names)))
        clusters = artifacts.get("clusters", {}).get(k)
        if clusters is not None:
            files.append(write_frame(out / f"clusters_k{k}.csv", clusters))

    files.append(_manifest(state, files, save_failures))
    return {"outputs": files, "failures": save_failures}


def failure_node(state: ExperimentState) -> dict:
    logger.warning("run stopped before evaluation: %d failure(s) recorded", len(state.get("failures", [])))
    return {"outputs": [_manifest(state, [])]}
