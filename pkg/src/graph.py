"""
LangGraph StateGraph wiring for the flat and mixed experiments.

Topology:
  START → load
        --conditional--> preprocess | failure
  preprocess
        --conditional--> tune | failure
  tune → predictions → evaluate → report → END
  failure → END

The flat and mixed experiments share this graph; state["mode"] selects whether
member predictions are made without clustering (k=0) or once per k in k_values.
"""

import logging
from typing import Dict, Literal

from langgraph.graph import END, START, StateGraph

from src.config import require_seed
from src.errors import FraudMixError
from src.nodes.data import load_node, preprocess_node
from src.nodes.output import failure_node, report_node
from src.nodes.scoring import evaluate_node, report_key
from src.nodes.training import predictions_node, tune_node
from src.state import EvaluationReport, ExperimentConfig, ExperimentState

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Conditional routing functions
# ---------------------------------------------------------------------------


def _route_after_load(state: ExperimentState) -> str:
    """Training data is the prerequisite for everything downstream."""
    return "loaded" if state.get("train") is not None else "failure"


def _route_after_preprocess(state: ExperimentState) -> str:
    return "ready" if state.get("folds") else "failure"


def build_graph():
    builder = StateGraph(ExperimentState)

    builder.add_node("load", load_node)
    builder.add_node("preprocess", preprocess_node)
    builder.add_node("tune", tune_node)
    builder.add_node("predictions", predictions_node)
    builder.add_node("evaluate", evaluate_node)
    builder.add_node("report", report_node)
    builder.add_node("failure", failure_node)

    builder.add_edge(START, "load")
    builder.add_conditional_edges(
        "load",
        _route_after_load,
        {"loaded": "preprocess", "failure": "failure"},
    )
    builder.add_conditional_edges(
        "preprocess",
        _route_after_preprocess,
        {"ready": "tune", "failure": "failure"},
    )
    builder.add_edge("tune", "predictions")
    builder.add_edge("predictions", "evaluate")
    builder.add_edge("evaluate", "report")
    builder.add_edge("report", END)
    builder.add_edge("failure", END)

    return builder.compile()


def initial_state(config: ExperimentConfig, mode: Literal["flat", "mixed"]) -> ExperimentState:
    return {
        "config": config,
        "mode": mode,
        "train": None,
        "validation": None,
        "folds": [],
        "truth": {},
        "verdict": None,
        "tuned": {},
        "predictions": {},
        "reports": {},
        "artifacts": {},
        "failures": [],
        "outputs": [],
    }


def run_experiment(config: ExperimentConfig, mode: Literal["flat", "mixed"]) -> ExperimentState:
    """Run the whole pipeline and return the final state. Requires a seed."""
    require_seed(config)
    logger.info("starting %s experiment (seed %d, output %s)", mode, config.seed, config.out)
    final_state = build_graph().invoke(initial_state(config, mode))
    for failure in final_state.get("failures", []):
        logger.warning("recorded failure [%s] %s: %s", failure.stage, failure.label, failure.error)
    return final_state


def _reports_or_raise(final_state: ExperimentState) -> Dict[str, EvaluationReport]:
    reports = final_state.get("reports", {})
    if not reports:
        reasons = "; ".join(f"{f.stage} {f.label}: {f.error}" for f in final_state.get("failures", []))
        raise FraudMixError(f"experiment produced no report ({reasons or 'no reason recorded'})")
    return reports


def run_flat_experiment(config: ExperimentConfig) -> EvaluationReport:
    return _reports_or_raise(run_experiment(config, "flat"))[report_key(0)]


def run_mixed_experiment(config: ExperimentConfig) -> Dict[int, EvaluationReport]:
    reports = _reports_or_raise(run_experiment(config, "mixed"))
    return {k: reports[report_key(k)] for k in config.k_values}
