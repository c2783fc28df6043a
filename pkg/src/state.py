import operator
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import TypedDict


# ---------------------------------------------------------------------------
# Roster vocabulary
# ---------------------------------------------------------------------------

Family = Literal["KNN", "NB", "LR", "RF", "GBT", "MLP"]
Variant = Literal["classical", "class_weighted"]
Optimizer = Literal["adam_sgd", "lbfgs"]
Rule = Literal["MV", "OR"]

# Canonical roster order. Ensemble indices are assigned lexicographically over this order.
ROSTER_ORDER: Tuple[str, ...] = (
    "NB",
    "KNN",
    "KNN-m",
    "LR",
    "LR-m",
    "RF",
    "RF-m",
    "GBT",
    "GBT-m",
    "MLP-A",
    "MLP-A-m",
    "MLP-l",
    "MLP-l-m",
)

# Searchable / documented hyperparameters per family, with their defaults.
DEFAULT_HYPERPARAMETERS: Dict[str, Dict[str, Any]] = {
    "KNN": {"n_neighbors": 5},
    "NB": {"var_smoothing": 1e-9},
    "LR": {"l2": 0.0, "learning_rate": 0.1, "max_iter": 5000, "tol": 1e-6},
    "RF": {"n_trees": 100, "max_depth": None, "min_samples_leaf": 1, "max_features": None},
    "GBT": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3, "min_samples_leaf": 1},
    "MLP": {
        "hidden_units": 64,
        "epochs": 50,
        "learning_rate": 1e-3,
        "batch_size": 128,
        "alpha": 0.0,
        "max_iter": 200,
        "history": 10,
    },
}


def _as_matrix(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got {arr.ndim} dimension(s)")
    return arr


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------


class Dataset(BaseModel):
    """Feature matrix, binary fraud labels (1 = fraud) and column names."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: np.ndarray
    labels: np.ndarray
    feature_names: List[str]

    @field_validator("features", mode="before")
    @classmethod
    def _coerce_features(cls, value: Any) -> np.ndarray:
        return _as_matrix(value)

    @field_validator("labels", mode="before")
    @classmethod
    def _coerce_labels(cls, value: Any) -> np.ndarray:
        arr = np.asarray(value).reshape(-1)
        if arr.size and np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
            raise ValueError("labels must contain only 0 and 1")
        return arr.astype(np.int64)

    @model_validator(mode="after")
    def _check_invariants(self) -> "Dataset":
        n, d = self.features.shape
        if n != self.labels.shape[0]:
            raise ValueError(
                f"feature matrix has {n} rows but label vector has {self.labels.shape[0]} entries"
            )
        if d != len(self.feature_names) and n > 0:
            raise ValueError(f"{d} feature columns but {len(self.feature_names)} feature names")
        if n and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must contain only 0 and 1")
        if not np.isfinite(self.features).all():
            raise ValueError("feature matrix contains missing or non-finite values")
        return self

    @property
    def n_objects(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def class_counts(self) -> Tuple[int, int]:
        """(genuine count, fraud count)."""
        fraud = int(self.labels.sum())
        return self.n_objects - fraud, fraud

    def subset(self, indices: np.ndarray) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[indices],
            labels=self.labels[indices],
            feature_names=list(self.feature_names),
        )

    def select_columns(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        return Dataset(
            features=self.features[:, mask],
            labels=self.labels,
            feature_names=[name for name, keep in zip(self.feature_names, mask) if keep],
        )


class ScalerParams(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    minimum: np.ndarray
    maximum: np.ndarray

    @field_validator("minimum", "maximum", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=np.float64).reshape(-1)

    @model_validator(mode="after")
    def _check_order(self) -> "ScalerParams":
        if self.minimum.shape != self.maximum.shape:
            raise ValueError("minimum and maximum vectors differ in length")
        if (self.minimum > self.maximum).any():
            raise ValueError("scaler minimum exceeds maximum for some feature")
        return self


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int

    @field_validator("train_indices", "test_indices", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=np.int64).reshape(-1)

    @model_validator(mode="after")
    def _check_disjoint(self) -> "SplitSpec":
        if np.intersect1d(self.train_indices, self.test_indices).size:
            raise ValueError("train and test index sets overlap")
        return self


class FeatureVerdict(BaseModel):
    """Per-method scores, per-method votes and the 2-of-3 relevance mask."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature_names: List[str]
    pearson: np.ndarray
    mutual_information: np.ndarray
    importance: np.ndarray
    vote_pearson: np.ndarray
    vote_mutual_information: np.ndarray
    vote_importance: np.ndarray
    relevant: np.ndarray
    forced: bool = Field(default=False, description="True when the empty-mask fallback picked a feature")
    importance_degenerate: bool = Field(
        default=False, description="True when the forest made no split and importance is uniform"
    )


# ---------------------------------------------------------------------------
# Learner configuration
# ---------------------------------------------------------------------------


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Family
    variant: Variant = "classical"
    optimizer: Optional[Optimizer] = None
    hyperparameters: Dict[str, Optional[float | int]] = Field(default_factory=dict)
    seed: int = 0

    @model_validator(mode="after")
    def _check_family_fields(self) -> "ModelSpec":
        if (self.family == "MLP") != (self.optimizer is not None):
            raise ValueError("optimizer must be set for MLP specs and only for MLP specs")
        allowed = DEFAULT_HYPERPARAMETERS[self.family]
        unknown = sorted(set(self.hyperparameters) - set(allowed))
        if unknown:
            raise ValueError(
                f"unknown hyperparameter(s) {unknown} for {self.family}; allowed: {sorted(allowed)}"
            )
        return self

    @property
    def acronym(self) -> str:
        base = self.family
        if self.family == "MLP":
            base = "MLP-A" if self.optimizer == "adam_sgd" else "MLP-l"
        return f"{base}-m" if self.variant == "class_weighted" else base

    def param(self, name: str) -> Any:
        """Hyperparameter value, falling back to the family default."""
        return self.hyperparameters.get(name, DEFAULT_HYPERPARAMETERS[self.family][name])

    def with_hyperparameters(self, **updates: Any) -> "ModelSpec":
        merged = {**self.hyperparameters, **updates}
        return ModelSpec(
            family=self.family,
            variant=self.variant,
            optimizer=self.optimizer,
            hyperparameters=merged,
            seed=self.seed,
        )


class ClassWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    w0: float = Field(gt=0.0)
    w1: float = Field(gt=0.0)

    def for_labels(self, labels: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(labels) == 1, self.w1, self.w0).astype(np.float64)


class EnsembleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    members: List[str]
    rule: Rule
    index: int = Field(default=0, ge=0, description="Stable 1-based report index; 0 when unnumbered")

    @model_validator(mode="after")
    def _check_members(self) -> "EnsembleSpec":
        m = len(self.members)
        if len(set(self.members)) != m:
            raise ValueError(f"ensemble members must be distinct: {self.members}")
        if self.rule == "MV" and m % 2 == 0:
            raise ValueError(f"majority-vote ensembles need an odd member count, got {m}")
        if self.rule == "OR" and m < 2:
            raise ValueError(f"OR ensembles need at least 2 members, got {m}")
        return self

    @property
    def label(self) -> str:
        """'CC-OR 17' when numbered, otherwise the members: 'CC-OR NB+KNN'."""
        if self.index:
            return f"CC-{self.rule} {self.index}"
        return f"CC-{self.rule} {'+'.join(self.members)}"

    @property
    def composition(self) -> str:
        return " ".join(self.members)


class MixedTemplate(BaseModel):
    """Cluster count plus the predictor fitted inside every cluster."""

    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=1)
    predictor: ModelSpec | EnsembleSpec


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------


class KMeansModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(ge=1)
    centroids: np.ndarray
    inertia: float = Field(ge=0.0)
    iterations_run: int = Field(ge=0)
    inertia_trace: List[float] = Field(default_factory=list)
    reseeded_last: bool = False

    @field_validator("centroids", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return _as_matrix(value)

    @model_validator(mode="after")
    def _check_centroids(self) -> "KMeansModel":
        if self.centroids.shape[0] != self.k:
            raise ValueError(f"expected {self.k} centroids, got {self.centroids.shape[0]}")
        if not np.isfinite(self.centroids).all():
            raise ValueError("centroids must be finite")
        return self


class ConstantPredictor(BaseModel):
    """Degenerate per-cluster predictor emitting one fixed label."""

    model_config = ConfigDict(frozen=True)

    label: Literal[0, 1]
    reason: Literal["single_class_cluster", "empty_cluster", "below_min_size"]

    def predict_score(self, features: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(features).shape[0], float(self.label))

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(features).shape[0], self.label, dtype=np.int64)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class ConfusionCounts(BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )


class MetricsRow(BaseModel):
    """Derived metrics; None marks a metric whose denominator is zero."""

    model_config = ConfigDict(frozen=True)

    acc: Optional[float]
    bcr: Optional[float]
    sens: Optional[float]
    spec: Optional[float]
    f1: Optional[float]
    mean4: Optional[float]
    mean4_partial: bool = Field(default=False, description="mean4 computed over fewer than four metrics")
    counts: ConfusionCounts


class ReportRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    kind: Literal["model", "ensemble"]
    rule: Optional[Rule] = None
    composition: str
    metrics: MetricsRow
    folds: Dict[str, MetricsRow] = Field(default_factory=dict)
    good_performing: bool = False


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str
    rows: List[ReportRow]
    sort_keys: Tuple[str, ...] = ("bcr", "sens", "mean4")


class FailureRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: str
    label: str
    error: str


# ---------------------------------------------------------------------------
# Experiment configuration and graph state
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    data: Optional[str] = None
    label_column: str = "Class"
    validation: Optional[str] = None
    exclude_columns: List[str] = Field(default_factory=list)
    seed: Optional[int] = None
    select_features: bool = True
    mi_bins: int = Field(default=10, ge=2)
    rebalance: bool = True
    k_values: List[int] = Field(default_factory=lambda: [2, 3, 4, 5])
    roster: List[str] = Field(default_factory=lambda: list(ROSTER_ORDER))
    rules: List[Rule] = Field(default_factory=lambda: ["MV", "OR"])
    grids: Optional[str] = None
    specs: Optional[str] = None  # tuned_models.txt from an earlier run; replaces the search
    search: bool = True
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    folds: int = Field(default=10, ge=2)
    jobs: int = 1
    out: str = "results"
    min_cluster_size: int = Field(default=10, ge=1)
    top_ensembles: int = Field(default=3, ge=0)
    save_models: bool = False

    @field_validator("k_values")
    @classmethod
    def _check_k_values(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("k_values must not be empty")
        bad = [k for k in value if k < 1 or k > 5]
        if bad:
            raise ValueError(f"k_values must be drawn from 1..5, got {bad}")
        if len(set(value)) != len(value):
            raise ValueError("k_values entries must be distinct")
        return value

    @field_validator("roster")
    @classmethod
    def _check_roster(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("roster must not be empty")
        unknown = [a for a in value if a not in ROSTER_ORDER and a != "NB-m"]
        if unknown:
            raise ValueError(f"unknown roster acronym(s) {unknown}")
        if len(set(value)) != len(value):
            raise ValueError("roster entries must be distinct")
        return value


class EvaluationFold(BaseModel):
    """One train/test evaluation unit. train_indices=None means the whole training set."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    train_indices: Optional[np.ndarray] = None
    test_indices: Optional[np.ndarray] = None


class MemberPredictions(BaseModel):
    """Hard labels of one roster model on every evaluation fold, for one cluster count."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    acronym: str
    k: int = Field(ge=0, description="0 for flat (no clustering)")
    predicted: Dict[str, np.ndarray]


class ExperimentState(TypedDict):
    config: ExperimentConfig
    mode: Literal["flat", "mixed"]
    train: Optional[Dataset]
    validation: Optional[Dataset]
    folds: List[EvaluationFold]
    truth: Dict[str, np.ndarray]
    verdict: Optional[FeatureVerdict]

    # operator.ior merges dicts. Keys are namespaced per model / per k so parallel
    # writers never collide.
    tuned: Annotated[Dict[str, ModelSpec], operator.ior]
    predictions: Annotated[Dict[str, MemberPredictions], operator.ior]
    reports: Annotated[Dict[str, EvaluationReport], operator.ior]
    artifacts: Annotated[Dict[str, Any], operator.ior]

    # operator.add appends. Failures never abort the sweep.
    failures: Annotated[List[FailureRecord], operator.add]
    outputs: Annotated[List[str], operator.add]
