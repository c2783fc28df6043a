"""
Graph topology and end-to-end pipeline tests.

Runs use a small synthetic dataset, a three-model roster and no hyperparameter
search so a whole sweep stays fast. Node failures are injected with patch.
"""

import json
from unittest.mock import patch

import numpy as np
import pytest

from src.errors import ConfigError, FraudMixError
from src.graph import (
    _route_after_load,
    _route_after_preprocess,
    build_graph,
    initial_state,
    run_experiment,
    run_flat_experiment,
    run_mixed_experiment,
)
from src.learners import fit_with_treatment as real_fit_with_treatment
from src.state import ExperimentConfig
from src.tools.synthetic import clustered_fraud, write_csv

SMALL_ROSTER = ["NB", "KNN", "LR"]


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def data_path(tmp_path):
    return write_csv(clustered_fraud(n=300, fraud_rate=0.05, seed=0), tmp_path / "train.csv")


def make_config(data_path, out, **kwargs) -> ExperimentConfig:
    defaults = dict(
        data=str(data_path),
        seed=1,
        roster=SMALL_ROSTER,
        search=False,
        select_features=False,
        folds=3,
        k_values=[1, 2],
        out=str(out),
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------


def test_graph_compiles_with_every_node():
    nodes = set(build_graph().get_graph().nodes)
    assert {"load", "preprocess", "tune", "predictions", "evaluate", "report", "failure"} <= nodes


def test_routing_functions():
    state = initial_state(ExperimentConfig(), "flat")
    assert _route_after_load(state) == "failure"
    assert _route_after_preprocess(state) == "failure"
    state["train"] = clustered_fraud(n=40, seed=0)
    state["folds"] = ["fold1"]
    assert _route_after_load(state) == "loaded"
    assert _route_after_preprocess(state) == "ready"


# ---------------------------------------------------------------------------
# Flat runs
# ---------------------------------------------------------------------------


def test_flat_run_reports_models_and_ensembles(data_path, tmp_path):
    out = tmp_path / "flat"
    report = run_flat_experiment(make_config(data_path, out))

    labels = [row.label for row in report.rows]
    # 3 models, 1 majority-vote triple, 3 OR pairs and 1 OR triple
    assert len(labels) == 8
    assert set(SMALL_ROSTER) <= set(labels)
    assert sum(1 for label in labels if label.startswith("CC-MV")) == 1
    assert sum(1 for label in labels if label.startswith("CC-OR")) == 4
    assert all(row.metrics.counts.total == 300 for row in report.rows)

    for name in ("report_flat.csv", "report_flat.txt", "summary_flat.txt", "report_folds_flat.csv",
                 "ensembles.csv", "tuned_models.txt", "manifest.json"):
        assert (out / name).exists(), name

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "flat"
    assert manifest["seed"] == 1
    assert manifest["failures"] == []
    assert manifest["counts"] == {"flat": 8}


def test_flat_run_is_byte_identical_across_runs(data_path, tmp_path):
    run_flat_experiment(make_config(data_path, tmp_path / "a"))
    run_flat_experiment(make_config(data_path, tmp_path / "b"))
    for name in ("report_flat.csv", "report_flat.txt", "ensembles.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_feature_selection_and_search_outputs(data_path, tmp_path):
    out = tmp_path / "tuned"
    config = make_config(data_path, out, roster=["NB", "KNN"], rules=["OR"], select_features=True, search=True)
    final_state = run_experiment(config, "flat")
    assert (out / "feature_selection.csv").exists()
    assert final_state["verdict"].relevant.any()
    assert final_state["tuned"]["KNN"].param("n_neighbors") in (1, 3, 5, 7, 9)


def test_missing_seed_is_rejected(data_path, tmp_path):
    with pytest.raises(ConfigError):
        run_flat_experiment(make_config(data_path, tmp_path, seed=None))


# ---------------------------------------------------------------------------
# Mixed runs
# ---------------------------------------------------------------------------


def test_mixed_run_writes_one_report_per_k(data_path, tmp_path):
    out = tmp_path / "mixed"
    reports = run_mixed_experiment(make_config(data_path, out))
    assert set(reports) == {1, 2}
    for name in ("report_mixed_k1.csv", "report_mixed_k2.csv", "centroids_k2.txt", "clusters_k2.csv"):
        assert (out / name).exists(), name


def test_single_cluster_mixed_report_equals_flat_report(data_path, tmp_path):
    flat = run_flat_experiment(make_config(data_path, tmp_path / "flat"))
    mixed = run_mixed_experiment(make_config(data_path, tmp_path / "mixed", k_values=[1]))[1]
    assert [r.label for r in mixed.rows] == [r.label for r in flat.rows]
    assert [r.metrics for r in mixed.rows] == [r.metrics for r in flat.rows]


# ---------------------------------------------------------------------------
# Failure handling
# ---------------------------------------------------------------------------


def test_unreadable_dataset_routes_to_failure(tmp_path):
    out = tmp_path / "failed"
    config = make_config(tmp_path / "absent.csv", out)
    final_state = run_experiment(config, "flat")
    assert final_state["reports"] == {}
    assert [f.stage for f in final_state["failures"]] == ["load"]

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == []
    assert manifest["failures"][0]["stage"] == "load"

    with pytest.raises(FraudMixError, match="no report"):
        run_flat_experiment(config)


def test_failed_member_is_dropped_with_its_ensembles(data_path, tmp_path):
    def fail_on_lr(spec, train, rebalance_classical=True):
        if spec.family == "LR":
            raise np.linalg.LinAlgError("singular design")
        return real_fit_with_treatment(spec, train, rebalance_classical)

    with patch("src.nodes.training.fit_with_treatment", side_effect=fail_on_lr):
        final_state = run_experiment(make_config(data_path, tmp_path / "partial"), "flat")

    labels = [row.label for row in final_state["reports"]["flat"].rows]
    assert "LR" not in labels
    # NB+KNN is the only ensemble left: one OR pair
    assert len(labels) == 3
    stages = sorted({f.stage for f in final_state["failures"]})
    assert stages == ["ensemble", "fit"]
