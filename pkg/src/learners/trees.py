"""
CART decision trees shared by the random forest and gradient boosting learners.

Two split criteria:
  gini: weighted Gini impurity over binary labels (classification trees)
  sse:  weighted squared error over real targets (boosting regression trees)

Trees are stored as flat arrays and grown with an explicit stack, so unlimited
depth never hits the recursion limit. At every node the candidate features are
visited in random order until `max_features` non-constant ones have been scored.
The shuffle runs over `visit_order` (column indices ranked by feature name), so
reordering the columns of a dataset does not change which features a split sees
or which one wins a tie.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

Criterion = Literal["gini", "sse"]

_LEAF = -1


class DecisionTree(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature: np.ndarray  # split feature per node, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # gini: weighted fraud fraction; sse: weighted mean target

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row (x <= threshold goes left)."""
        node = np.zeros(features.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != _LEAF)
        while active.size:
            current = node[active]
            go_left = features[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != _LEAF]
        return node

    def predict_value(self, features: np.ndarray) -> np.ndarray:
        return self.value[self.apply(features)]

    def with_leaf_values(self, values: np.ndarray) -> "DecisionTree":
        return self.model_copy(update={"value": np.asarray(values, dtype=np.float64)})


def _node_impurity(criterion: Criterion, w: np.ndarray, t: np.ndarray) -> Tuple[float, float]:
    """Returns (mass * impurity, node value)."""
    mass = float(w.sum())
    if mass <= 0:
        return 0.0, 0.0
    weighted_sum = float(np.dot(w, t))
    mean = weighted_sum / mass
    if criterion == "gini":
        return mass * 2.0 * mean * (1.0 - mean), mean
    return float(np.dot(w, t * t)) - weighted_sum * mean, mean


def _best_split_on_feature(
    criterion: Criterion,
    column: np.ndarray,
    w: np.ndarray,
    t: np.ndarray,
    min_samples_leaf: int,
) -> Tuple[float, float]:
    """Best (mass-weighted child impurity, threshold) for one feature; (inf, nan) if none."""
    order = np.argsort(column, kind="mergesort")
    xs = column[order]
    ws = w[order]
    wt = ws * t[order]

    cum_w = np.cumsum(ws)[:-1]
    cum_wt = np.cumsum(wt)[:-1]
    total_w = float(ws.sum())
    total_wt = float(wt.sum())

    n = xs.shape[0]
    left_count = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (left_count >= min_samples_leaf) & (n - left_count >= min_samples_leaf)
    valid &= (cum_w > 0) & (total_w - cum_w > 0)
    if not valid.any():
        return np.inf, np.nan

    right_w = total_w - cum_w
    right_wt = total_wt - cum_wt
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            p_left = cum_wt / cum_w
            p_right = right_wt / right_w
            child = cum_w * 2.0 * p_left * (1.0 - p_left) + right_w * 2.0 * p_right * (1.0 - p_right)
        else:
            cum_wtt = np.cumsum(wt * t[order])[:-1]
            total_wtt = float(np.dot(wt, t[order]))
            child = (cum_wtt - cum_wt ** 2 / cum_w) + ((total_wtt - cum_wtt) - right_wt ** 2 / right_w)

    child = np.where(valid, child, np.inf)
    best = int(np.argmin(child))
    threshold = 0.5 * (xs[best] + xs[best + 1])
    if threshold >= xs[best + 1]:
        threshold = xs[best]
    return float(child[best]), float(threshold)


def grow_tree(
    X: np.ndarray,
    targets: np.ndarray,
    sample_weight: np.ndarray,
    criterion: Criterion,
    rng: np.random.Generator,
    max_depth: Optional[int] = None,
    min_samples_leaf: int = 1,
    max_features: Optional[int] = None,
    visit_order: Optional[np.ndarray] = None,
) -> Tuple[DecisionTree, np.ndarray]:
    """
    Grow one tree. Returns the tree and the per-feature total impurity decrease
    (mass-weighted), the raw material of impurity-based feature importance.
    """
    n, d = X.shape
    n_candidates = d if max_features is None else max(1, min(max_features, d))
    visit_order = np.arange(d) if visit_order is None else np.asarray(visit_order, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    sample_weight = np.asarray(sample_weight, dtype=np.float64)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []
    decrease = np.zeros(d, dtype=np.float64)

    def new_node(node_value: float) -> int:
        feature.append(_LEAF)
        threshold.append(np.nan)
        left.append(_LEAF)
        right.append(_LEAF)
        value.append(node_value)
        return len(feature) - 1

    root_rows = np.arange(n)
    root_impurity, root_value = _node_impurity(criterion, sample_weight, targets)
    stack = [(new_node(root_value), root_rows, 0, root_impurity)]

    while stack:
        node, rows, depth, impurity = stack.pop()
        if impurity <= 1e-12 or rows.size < 2 * min_samples_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue

        w_node = sample_weight[rows]
        t_node = targets[rows]
        best_child, best_feature, best_threshold = np.inf, -1, np.nan
        scored = 0
        for j in visit_order[rng.permutation(d)]:
            column = X[rows, j]
            if column.min() == column.max():
                continue
            child, thr = _best_split_on_feature(criterion, column, w_node, t_node, min_samples_leaf)
            scored += 1
            if child < best_child:
                best_child, best_feature, best_threshold = child, int(j), thr
            if scored >= n_candidates:
                break

        if best_feature < 0:
            continue

        go_left = X[rows, best_feature] <= best_threshold
        left_rows, right_rows = rows[go_left], rows[~go_left]
        left_imp, left_val = _node_impurity(criterion, sample_weight[left_rows], targets[left_rows])
        right_imp, right_val = _node_impurity(criterion, sample_weight[right_rows], targets[right_rows])

        decrease[best_feature] += max(impurity - left_imp - right_imp, 0.0)
        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = new_node(left_val)
        right[node] = new_node(right_val)
        stack.append((right[node], right_rows, depth + 1, right_imp))
        stack.append((left[node], left_rows, depth + 1, left_imp))

    tree = DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
    )
    return tree, decrease


def name_order(feature_names: List[str]) -> np.ndarray:
    """Column indices sorted by feature name."""
    return np.argsort(np.asarray(feature_names, dtype=object), kind="mergesort")
