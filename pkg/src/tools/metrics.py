"""
Confusion counts and the derived classification rates. Fraud (1) is the positive class.

    acc  = (tp + tn) / total
    sens = tp / (tp + fn)          fraud recall
    spec = tn / (tn + fp)          genuine recall
    bcr  = (sens + spec) / 2
    f1   = tp / (tp + (fp + fn) / 2)
    mean4 = mean of the defined members of (acc, bcr, sens, spec)

A zero denominator yields None, never 0 or 1.
"""

from typing import Optional

import numpy as np

from src.errors import DimensionMismatchError
from src.state import ConfusionCounts, MetricsRow

# Both class CCRs at or above this mark a row as good performing.
GOOD_PERFORMING_CCR = 0.70


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values).reshape(-1)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def confusion(predicted, actual) -> ConfusionCounts:
    p = _as_binary(predicted, "predicted")
    a = _as_binary(actual, "actual")
    if p.shape != a.shape:
        raise DimensionMismatchError(f"predicted has {p.size} entries, actual has {a.size}")
    if p.size == 0:
        raise ValueError("confusion counts need at least one object")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (a == 1))),
        tn=int(np.sum((p == 0) & (a == 0))),
        fp=int(np.sum((p == 1) & (a == 0))),
        fn=int(np.sum((p == 0) & (a == 1))),
    )


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def metrics(counts: ConfusionCounts) -> MetricsRow:
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    acc = _ratio(tp + tn, counts.total)
    sens = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    bcr = (sens + spec) / 2 if sens is not None and spec is not None else None
    f1 = _ratio(tp, tp + 0.5 * (fp + fn))

    defined = [v for v in (acc, bcr, sens, spec) if v is not None]
    mean4 = sum(defined) / len(defined) if defined else None
    return MetricsRow(
        acc=acc,
        bcr=bcr,
        sens=sens,
        spec=spec,
        f1=f1,
        mean4=mean4,
        mean4_partial=len(defined) < 4,
        counts=counts,
    )


def evaluate_predictions(predicted, actual) -> MetricsRow:
    return metrics(confusion(predicted, actual))


def is_good_performing(row: MetricsRow) -> bool:
    return (
        row.sens is not None
        and row.spec is not None
        and row.sens >= GOOD_PERFORMING_CCR
        and row.spec >= GOOD_PERFORMING_CCR
    )
