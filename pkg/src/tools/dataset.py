"""
Transaction dataset tools: CSV ingestion, min-max scaling, minority oversampling,
stratified holdout and stratified fold partitioning.

All randomized helpers draw from np.random.default_rng(seed) and are therefore
bit-reproducible. Nothing here mutates its inputs.
"""

import logging
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd

from src.errors import DatasetError, DimensionMismatchError
from src.state import Dataset, ScalerParams, SplitSpec

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def load_csv(
    path: str | Path,
    label_column: str = "Class",
    exclude_columns: Iterable[str] = (),
) -> Dataset:
    """
    Load a comma-delimited UTF-8 file with a header row into a Dataset.

    Every non-label column is a numeric feature unless listed in exclude_columns.
    Rows reported in errors are 1-based data rows (the header is not counted).
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")

    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str, encoding="utf-8").iloc[0].tolist()
    except pd.errors.EmptyDataError as exc:
        raise DatasetError(f"dataset file is empty: {path}") from exc

    occurrences = header.count(label_column)
    if occurrences == 0:
        raise DatasetError(f"label column missing from {path}", column=label_column)
    if occurrences > 1:
        raise DatasetError(f"label column appears {occurrences} times in {path}", column=label_column)
    duplicated = sorted({name for name in header if header.count(name) > 1})
    if duplicated:
        raise DatasetError(f"duplicated column name(s) {duplicated} in {path}", column=duplicated[0])

    raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")

    labels_raw = raw[label_column].str.strip()
    bad_labels = ~labels_raw.isin(["0", "1"])
    if bad_labels.any():
        row = int(np.flatnonzero(bad_labels.to_numpy())[0])
        raise DatasetError(
            f"non-binary label '{labels_raw.iloc[row]}'", row=row + 1, column=label_column
        )

    excluded = set(exclude_columns)
    missing_excluded = sorted(excluded - set(header))
    if missing_excluded:
        raise DatasetError(f"excluded column(s) {missing_excluded} not present in {path}")

    feature_names = [c for c in raw.columns if c != label_column and c not in excluded]
    numeric = raw[feature_names].apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=np.float64)

    bad_cells = ~np.isfinite(values)
    if bad_cells.any():
        row, col = (int(i) for i in np.argwhere(bad_cells)[0])
        cell = raw[feature_names[col]].iloc[row]
        problem = "missing value" if cell.strip() == "" else f"non-numeric or non-finite cell '{cell}'"
        raise DatasetError(problem, row=row + 1, column=feature_names[col])

    dataset = Dataset(
        features=values,
        labels=labels_raw.astype(np.int64).to_numpy(),
        feature_names=feature_names,
    )
    genuine, fraud = dataset.class_counts()
    logger.info(
        "Loaded %s: %d objects x %d features, genuine=%d fraud=%d",
        path, dataset.n_objects, dataset.n_features, genuine, fraud,
    )
    return dataset


# ---------------------------------------------------------------------------
# Min-max scaling
# ---------------------------------------------------------------------------


def fit_scaler(train: Dataset) -> ScalerParams:
    if train.n_objects == 0:
        raise DatasetError("cannot fit a scaler on an empty dataset")
    return ScalerParams(
        minimum=train.features.min(axis=0),
        maximum=train.features.max(axis=0),
    )


def apply_scaler(params: ScalerParams, data: Dataset) -> Dataset:
    """Map features onto [0, 1]; constant columns map to 0, out-of-range values are clipped."""
    if data.features.shape[1] != params.minimum.shape[0]:
        raise DimensionMismatchError(
            f"scaler fitted on {params.minimum.shape[0]} features, data has {data.features.shape[1]}"
        )
    span = params.maximum - params.minimum
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    scaled = (data.features - params.minimum) / safe_span
    scaled[:, constant] = 0.0
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(features=scaled, labels=data.labels, feature_names=list(data.feature_names))


# ---------------------------------------------------------------------------
# Rebalancing
# ---------------------------------------------------------------------------


def rebalance(train: Dataset, seed: int) -> Dataset:
    """
    Oversample the minority class with replacement until both classes have equal
    counts. Original objects keep their order; the copies are appended.
    """
    genuine, fraud = train.class_counts()
    if genuine == 0 or fraud == 0:
        raise DatasetError("rebalancing needs both classes present")
    if genuine == fraud:
        return train

    minority = 1 if fraud < genuine else 0
    minority_idx = np.flatnonzero(train.labels == minority)
    deficit = abs(genuine - fraud)
    rng = np.random.default_rng(seed)
    extra = rng.choice(minority_idx, size=deficit, replace=True)
    order = np.concatenate([np.arange(train.n_objects), extra])
    return train.subset(order)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def _stratum_test_size(count: int, fraction: float) -> int:
    return int(np.floor(count * fraction + 0.5))


def split_holdout(data: Dataset, test_fraction: float, seed: int) -> SplitSpec:
    """Stratified random holdout split; per-class test counts are round(n_c * fraction)."""
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test fraction must lie in (0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    train_parts: List[np.ndarray] = []
    test_parts: List[np.ndarray] = []
    for label in (0, 1):
        members = np.flatnonzero(data.labels == label)
        n_test = _stratum_test_size(members.size, test_fraction)
        if n_test < 1 or n_test >= members.size:
            raise DatasetError(
                f"class {label} has {members.size} objects, too few to stratify "
                f"with test fraction {test_fraction}"
            )
        shuffled = rng.permutation(members)
        test_parts.append(shuffled[:n_test])
        train_parts.append(shuffled[n_test:])

    return SplitSpec(
        train_indices=np.sort(np.concatenate(train_parts)),
        test_indices=np.sort(np.concatenate(test_parts)),
        seed=seed,
    )


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> List[np.ndarray]:
    """
    Partition 0..n-1 into `folds` disjoint test-index sets.

    Each class is shuffled and dealt round-robin; the dealing position carries over
    from class 0 to class 1, so both total and per-class fold sizes differ by at
    most one.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise DatasetError(f"need at least 2 folds, got {folds}")
    rng = np.random.default_rng(seed)
    buckets: List[List[int]] = [[] for _ in range(folds)]
    position = 0
    for label in (0, 1):
        members = np.flatnonzero(labels == label)
        if members.size < folds:
            raise DatasetError(
                f"class {label} has {members.size} objects, too few for {folds} stratified folds"
            )
        for index in rng.permutation(members):
            buckets[position % folds].append(int(index))
            position += 1
    return [np.sort(np.asarray(bucket, dtype=np.int64)) for bucket in buckets]
