"""
Deterministic decision rules: ensemble vote aggregation and report ordering.

All rules are pure functions over arrays and metric rows. Nothing here fits,
loads or logs.

Rules:
  1. Majority vote (CC-MV): fraud iff more than half the members flag it; m must be odd
  2. OR-logic (CC-OR): fraud iff any member flags it
  3. Report order: bcr desc, then sens desc, then mean4 desc; undefined sorts last
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.state import MetricsRow, ReportRow, Rule


def _vote_matrix(votes) -> np.ndarray:
    matrix = np.asarray(votes)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2:
        raise ValueError(f"vote matrix must be 2-D (objects x members), got {matrix.ndim} dimension(s)")
    if matrix.size and not np.isin(matrix, (0, 1)).all():
        raise ValueError("vote matrix entries must be 0 or 1")
    return matrix.astype(np.int64)


# ---------------------------------------------------------------------------
# Rule 1: Majority vote
# ---------------------------------------------------------------------------


def aggregate_mv(votes) -> np.ndarray:
    """Row-wise mode of an n x m vote matrix. Raises on even m (ties are undefined)."""
    matrix = _vote_matrix(votes)
    m = matrix.shape[1]
    if m % 2 == 0:
        raise ValueError(f"majority vote needs an odd number of members, got {m}")
    return (2 * matrix.sum(axis=1) > m).astype(np.int64)


# ---------------------------------------------------------------------------
# Rule 2: OR-logic
# ---------------------------------------------------------------------------


def aggregate_or(votes) -> np.ndarray:
    matrix = _vote_matrix(votes)
    if matrix.shape[1] < 1:
        raise ValueError("OR aggregation needs at least one member")
    return matrix.any(axis=1).astype(np.int64)


def aggregate(rule: Rule, votes) -> np.ndarray:
    return aggregate_mv(votes) if rule == "MV" else aggregate_or(votes)


# ---------------------------------------------------------------------------
# Rule 3: Report order
# ---------------------------------------------------------------------------


def _desc(value: Optional[float]) -> float:
    # undefined behaves as -inf, i.e. after every defined value
    return -value if value is not None else math.inf


def sort_key(row: MetricsRow) -> Tuple[float, float, float]:
    return (_desc(row.bcr), _desc(row.sens), _desc(row.mean4))


def order_rows(rows: Sequence[ReportRow]) -> List[ReportRow]:
    """Stable sort; rows tied on all three keys keep their input order."""
    return sorted(rows, key=lambda row: sort_key(row.metrics))
