"""
Evaluation harness: fold materialization, stratified k-fold evaluation, holdout
hyperparameter search and report assembly.

Every evaluation unit rescales its features with a scaler fitted on that unit's
training portion only; imbalance treatment and clustering are likewise fold-local.
Aggregate metrics pool confusion counts over folds (micro-average).
"""

import itertools
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict

from src.errors import DatasetError, HyperparameterError, OptimizationError
from src.learners import fit_with_treatment
from src.learners.roster import spec_for
from src.mixed import DEFAULT_MIN_CLUSTER_SIZE, FittedEnsemble, fit_mixed
from src.rules import order_rows
from src.state import (
    ConfusionCounts,
    Dataset,
    EnsembleSpec,
    EvaluationFold,
    EvaluationReport,
    MetricsRow,
    MixedTemplate,
    ModelSpec,
    ReportRow,
    Rule,
)
from src.tools.dataset import apply_scaler, fit_scaler, split_holdout, stratified_folds
from src.tools.metrics import confusion, is_good_performing, metrics

logger = logging.getLogger(__name__)

VALIDATION_FOLD = "validation"


# ---------------------------------------------------------------------------
# Folds
# ---------------------------------------------------------------------------


def make_folds(train: Dataset, validation: Optional[Dataset], folds: int, seed: int) -> List[EvaluationFold]:
    """One validation unit when a validation set exists, else stratified k-fold units."""
    if validation is not None:
        return [EvaluationFold(name=VALIDATION_FOLD)]
    tests = stratified_folds(train.labels, folds, seed)
    all_indices = np.arange(train.n_objects)
    return [
        EvaluationFold(
            name=f"fold{i + 1}",
            train_indices=np.setdiff1d(all_indices, test, assume_unique=True),
            test_indices=test,
        )
        for i, test in enumerate(tests)
    ]


def materialize_fold(
    fold: EvaluationFold,
    train: Dataset,
    validation: Optional[Dataset] = None,
) -> Tuple[Dataset, Dataset]:
    """(scaled training portion, scaled test portion) for one evaluation unit."""
    if fold.train_indices is None:
        if validation is None:
            raise DatasetError(f"fold '{fold.name}' needs a validation set")
        fit_part, test_part = train, validation
    else:
        fit_part, test_part = train.subset(fold.train_indices), train.subset(fold.test_indices)
    scaler = fit_scaler(fit_part)
    return apply_scaler(scaler, fit_part), apply_scaler(scaler, test_part)


# ---------------------------------------------------------------------------
# Fitting any evaluable configuration
# ---------------------------------------------------------------------------


Evaluable = ModelSpec | EnsembleSpec | MixedTemplate


def fit_predictor(
    config: Evaluable,
    train: Dataset,
    seed: int,
    rebalance: bool = True,
    member_specs: Optional[Mapping[str, ModelSpec]] = None,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
) -> Any:
    """Fit a model, an ensemble or a mixed template; the result exposes predict()."""
    if isinstance(config, MixedTemplate):
        return fit_mixed(
            train, config.k, config.predictor, seed,
            rebalance=rebalance, min_cluster_size=min_cluster_size, member_specs=member_specs,
        )
    if isinstance(config, EnsembleSpec):
        specs = dict(member_specs or {})
        members = [
            fit_with_treatment(specs.get(name) or spec_for(name, seed), train, rebalance_classical=rebalance)
            for name in config.members
        ]
        return FittedEnsemble(spec=config, members=members)
    return fit_with_treatment(config, train, rebalance_classical=rebalance)


def describe(config: Evaluable) -> str:
    if isinstance(config, MixedTemplate):
        return f"k={config.k} {describe(config.predictor)}"
    if isinstance(config, EnsembleSpec):
        return f"{config.label} [{config.composition}]"
    return config.acronym


# ---------------------------------------------------------------------------
# K-fold cross-validation
# ---------------------------------------------------------------------------


class KFoldResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    per_fold: List[MetricsRow]
    aggregate: MetricsRow


def _evaluate_fold(
    config: Evaluable,
    data: Dataset,
    fold: EvaluationFold,
    seed: int,
    rebalance: bool,
    member_specs: Optional[Mapping[str, ModelSpec]],
    min_cluster_size: int,
) -> ConfusionCounts:
    fit_part, test_part = materialize_fold(fold, data)
    model = fit_predictor(config, fit_part, seed, rebalance, member_specs, min_cluster_size)
    return confusion(model.predict(test_part.features), test_part.labels)


def kfold_evaluate(
    config: Evaluable,
    data: Dataset,
    folds: int = 10,
    seed: int = 0,
    rebalance: bool = True,
    member_specs: Optional[Mapping[str, ModelSpec]] = None,
    min_cluster_size: int = DEFAULT_MIN_CLUSTER_SIZE,
    n_jobs: int = 1,
) -> KFoldResult:
    """
    Stratified k-fold: fit on k-1 folds, test on the held-out fold. The aggregate
    row is computed from the element-wise sum of the fold confusion counts.
    """
    units = make_folds(data, None, folds, seed)
    args = (seed, rebalance, member_specs, min_cluster_size)
    if n_jobs == 1:
        counts = [_evaluate_fold(config, data, unit, *args) for unit in units]
    else:
        counts = Parallel(n_jobs=n_jobs)(delayed(_evaluate_fold)(config, data, unit, *args) for unit in units)

    total = counts[0]
    for c in counts[1:]:
        total = total + c
    logger.debug("%s: %d-fold aggregate %s", describe(config), folds, total)
    return KFoldResult(per_fold=[metrics(c) for c in counts], aggregate=metrics(total))


# ---------------------------------------------------------------------------
# Holdout hyperparameter search
# ---------------------------------------------------------------------------


class SearchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    best: ModelSpec
    f1: Optional[float]
    candidates: List[Tuple[Dict[str, Any], Optional[float]]]


def grid_points(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product in key order, last key varying fastest."""
    if not grid:
        raise HyperparameterError("hyperparameter grid is empty")
    empty = [name for name, values in grid.items() if len(values) == 0]
    if empty:
        raise HyperparameterError(f"hyperparameter grid has no values for {empty}")
    names = list(grid)
    return [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]


def _score_candidate(
    spec: ModelSpec,
    fit_part: Dataset,
    test_part: Dataset,
    rebalance: bool,
) -> Optional[float]:
    try:
        model = fit_with_treatment(spec, fit_part, rebalance_classical=rebalance)
    except OptimizationError as exc:
        logger.warning("%s %s: candidate failed: %s", spec.acronym, spec.hyperparameters, exc)
        return None
    return metrics(confusion(model.predict(test_part.features), test_part.labels)).f1


def holdout_search(
    grid: Mapping[str, Sequence[Any]],
    template: ModelSpec,
    data: Dataset,
    test_fraction: float = 0.2,
    seed: int = 0,
    rebalance: bool = True,
    n_jobs: int = 1,
) -> SearchResult:
    """
    Exhaustive grid search scored by F1 on one stratified holdout split.

    Ties keep the earliest grid point; an undefined F1 ranks below every defined one.
    """
    points = grid_points(grid)
    split = split_holdout(data, test_fraction, seed)
    fit_part, test_part = data.subset(split.train_indices), data.subset(split.test_indices)
    specs = [template.with_hyperparameters(**point) for point in points]

    if n_jobs == 1:
        scores = [_score_candidate(s, fit_part, test_part, rebalance) for s in specs]
    else:
        scores = Parallel(n_jobs=n_jobs)(
            delayed(_score_candidate)(s, fit_part, test_part, rebalance) for s in specs
        )

    best_at = 0
    best_value = -math.inf
    for i, score in enumerate(scores):
        value = score if score is not None else -math.inf
        if value > best_value:
            best_at, best_value = i, value

    logger.info(
        "%s: best of %d candidates %s (F1 %s)",
        template.acronym, len(specs), points[best_at],
        f"{scores[best_at]:.4f}" if scores[best_at] is not None else "undefined",
    )
    return SearchResult(best=specs[best_at], f1=scores[best_at], candidates=list(zip(points, scores)))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def make_row(
    label: str,
    aggregate: MetricsRow,
    folds: Optional[Dict[str, MetricsRow]] = None,
    composition: Optional[str] = None,
    rule: Optional[Rule] = None,
) -> ReportRow:
    return ReportRow(
        label=label,
        kind="ensemble" if rule is not None else "model",
        rule=rule,
        composition=composition if composition is not None else label,
        metrics=aggregate,
        folds=folds or {},
        good_performing=is_good_performing(aggregate),
    )


def build_report(rows: Sequence[ReportRow], title: str = "report") -> EvaluationReport:
    """Rows ordered by bcr, then sens, then mean4, all descending; stable on full ties."""
    return EvaluationReport(title=title, rows=order_rows(rows))
