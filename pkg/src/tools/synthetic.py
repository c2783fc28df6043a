"""
Synthetic transaction generators with planted structure.

Used by the test-suite and by the `synthetic` subcommand, which writes a CSV in
the loader's schema (feature columns V1..Vd plus the label column).
"""

import logging
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from src.state import Dataset

logger = logging.getLogger(__name__)

Generator = Literal["blobs", "separable", "imbalanced", "clustered"]
GENERATORS: tuple[str, ...] = ("blobs", "separable", "imbalanced", "clustered")


def _names(d: int) -> list[str]:
    return [f"V{j + 1}" for j in range(d)]


def _shuffled(features: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> Dataset:
    order = rng.permutation(labels.size)
    return Dataset(features=features[order], labels=labels[order], feature_names=_names(features.shape[1]))


def planted_blobs(
    n_per_blob: int = 20,
    centers: Sequence[Sequence[float]] = ((0.0, 0.0), (10.0, 0.0)),
    radius: float = 1.0,
    fraud_rates: Sequence[float] = (0.0, 0.5),
    seed: int = 0,
) -> Dataset:
    """
    Points drawn uniformly from discs of the given radius around each center.
    Blob b contains round(n_per_blob * fraud_rates[b]) fraud objects. Rows are
    ordered blob by blob (not shuffled) so tests can address each blob directly.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    features, labels = [], []
    for center, rate in zip(centers, fraud_rates):
        angle = rng.uniform(0.0, 2.0 * np.pi, n_per_blob)
        dist = radius * np.sqrt(rng.uniform(0.0, 1.0, n_per_blob))
        offsets = np.zeros((n_per_blob, centers.shape[1]))
        offsets[:, 0] = dist * np.cos(angle)
        offsets[:, 1] = dist * np.sin(angle)
        features.append(center + offsets)
        n_fraud = int(round(n_per_blob * rate))
        labels.append(np.r_[np.ones(n_fraud, dtype=np.int64), np.zeros(n_per_blob - n_fraud, dtype=np.int64)])
    features = np.vstack(features)
    return Dataset(features=features, labels=np.concatenate(labels), feature_names=_names(features.shape[1]))


def separable(n: int = 200, margin: float = 0.1, seed: int = 0) -> Dataset:
    """2-D points in the unit square labelled by the diagonal x0 + x1 > 1, with a margin band removed."""
    rng = np.random.default_rng(seed)
    half = n // 2
    chunks = {0: [], 1: []}
    while len(chunks[0]) < n - half or len(chunks[1]) < half:
        point = rng.uniform(0.0, 1.0, 2)
        side = point.sum() - 1.0
        if abs(side) < margin / 2:
            continue
        label = int(side > 0)
        if len(chunks[label]) < (half if label else n - half):
            chunks[label].append(point)
    features = np.vstack([np.asarray(chunks[0]), np.asarray(chunks[1])])
    labels = np.r_[np.zeros(n - half, dtype=np.int64), np.ones(half, dtype=np.int64)]
    return _shuffled(features, labels, rng)


def imbalanced(
    n: int = 5000,
    fraud_rate: float = 0.01,
    n_features: int = 5,
    shift: float = 1.5,
    seed: int = 0,
) -> Dataset:
    """Gaussian genuine cloud; fraud shifted by `shift` along every feature."""
    rng = np.random.default_rng(seed)
    n_fraud = max(1, int(round(n * fraud_rate)))
    genuine = rng.normal(0.0, 1.0, (n - n_fraud, n_features))
    fraud = rng.normal(shift, 1.0, (n_fraud, n_features))
    labels = np.r_[np.zeros(n - n_fraud, dtype=np.int64), np.ones(n_fraud, dtype=np.int64)]
    return _shuffled(np.vstack([genuine, fraud]), labels, rng)


def clustered_fraud(
    n: int = 4000,
    n_clusters: int = 4,
    fraud_rate: float = 0.01,
    n_features: int = 4,
    spread: float = 8.0,
    seed: int = 0,
) -> Dataset:
    """
    Well-separated customer segments, each with its own fraud signature: inside
    segment c, fraud is displaced along feature (c mod d) with alternating sign,
    so no single global direction separates fraud from genuine traffic.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, spread, (n_clusters, n_features))
    sizes = np.full(n_clusters, n // n_clusters)
    sizes[: n % n_clusters] += 1
    features, labels = [], []
    for c, size in enumerate(sizes):
        n_fraud = max(1, int(round(size * fraud_rate)))
        genuine = centers[c] + rng.normal(0.0, 1.0, (size - n_fraud, n_features))
        displacement = np.zeros(n_features)
        displacement[c % n_features] = 2.5 if c % 2 == 0 else -2.5
        fraud = centers[c] + displacement + rng.normal(0.0, 0.5, (n_fraud, n_features))
        features += [genuine, fraud]
        labels += [np.zeros(size - n_fraud, dtype=np.int64), np.ones(n_fraud, dtype=np.int64)]
    return _shuffled(np.vstack(features), np.concatenate(labels), rng)


def generate(kind: Generator, seed: int, n: int | None = None) -> Dataset:
    if kind == "blobs":
        return planted_blobs(n_per_blob=(n or 40) // 2, seed=seed)
    if kind == "separable":
        return separable(n=n or 200, seed=seed)
    if kind == "imbalanced":
        return imbalanced(n=n or 5000, seed=seed)
    if kind == "clustered":
        return clustered_fraud(n=n or 4000, seed=seed)
    raise ValueError(f"unknown generator '{kind}'; known: {list(GENERATORS)}")


def to_frame(data: Dataset, label_column: str = "Class") -> pd.DataFrame:
    frame = pd.DataFrame(data.features, columns=data.feature_names)
    frame[label_column] = data.labels
    return frame


def write_csv(data: Dataset, path: str | Path, label_column: str = "Class") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    to_frame(data, label_column).to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote %d synthetic objects (%d fraud) to %s", data.n_objects, data.class_counts()[1], path)
    return path
