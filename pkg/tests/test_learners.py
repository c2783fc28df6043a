import joblib
import numpy as np
import pytest

from src.errors import DatasetError, DimensionMismatchError, HyperparameterError
from src.learners import (
    compute_class_weights,
    fit_classifier,
    fit_with_treatment,
    load_bundle,
    load_model,
    predict,
    predict_score,
    save_model,
)
from src.learners.base import ConstantClassifier
from src.learners.forest import fit_random_forest
from src.learners.knn import KNNClassifier
from src.learners.roster import default_roster, spec_for
from src.state import ROSTER_ORDER, Dataset, ModelSpec
from src.tools.dataset import apply_scaler, fit_scaler

SMALL = {
    "LR": {"max_iter": 300},
    "RF": {"n_trees": 10},
    "GBT": {"n_rounds": 10},
    "MLP": {"hidden_units": 8, "epochs": 5, "max_iter": 50},
}


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


def make_dataset(n: int = 200, fraud_rate: float = 0.2, d: int = 3, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < fraud_rate).astype(int)
    labels[:2] = [0, 1]
    features = rng.normal(size=(n, d)) + labels[:, None] * 1.5
    return Dataset(features=features, labels=labels, feature_names=[f"V{j + 1}" for j in range(d)])


def make_spec(acronym: str, seed: int = 0) -> ModelSpec:
    spec = spec_for(acronym, seed)
    return spec.with_hyperparameters(**SMALL.get(spec.family, {}))


def knn_oracle(train: Dataset, query: np.ndarray, k: int, w0: float = 1.0, w1: float = 1.0) -> int:
    d2 = ((train.features - query) ** 2).sum(axis=1)
    nearest = np.argsort(d2, kind="stable")[:k]
    fraud = (train.labels[nearest] == 1).sum() * w1
    genuine = (train.labels[nearest] == 0).sum() * w0
    return int(fraud >= genuine)


# ---------------------------------------------------------------------------
# Shared contract
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("acronym", ROSTER_ORDER)
def test_predict_agrees_with_score_threshold(acronym):
    data = make_dataset()
    model = fit_with_treatment(make_spec(acronym), data)
    scores = predict_score(model, data.features)
    labels = predict(model, data.features)
    assert np.all((scores >= 0.0) & (scores <= 1.0))
    assert np.array_equal(labels, (scores >= 0.5).astype(int))
    assert set(np.unique(labels)) <= {0, 1}


@pytest.mark.parametrize("acronym", ["NB", "KNN", "LR", "RF", "GBT", "MLP-l"])
def test_fitting_is_deterministic_for_a_seed(acronym):
    data = make_dataset(seed=4)
    first = fit_with_treatment(make_spec(acronym, seed=7), data)
    second = fit_with_treatment(make_spec(acronym, seed=7), data)
    assert np.array_equal(predict_score(first, data.features), predict_score(second, data.features))


def test_predict_rejects_wrong_feature_count():
    model = fit_classifier(make_spec("NB"), make_dataset(d=3))
    with pytest.raises(DimensionMismatchError):
        predict(model, np.zeros((4, 2)))


def test_predict_on_empty_input():
    model = fit_classifier(make_spec("LR"), make_dataset())
    assert predict(model, np.zeros((0, 3))).shape == (0,)


def test_roster_covers_every_acronym():
    roster = default_roster(seed=3)
    assert list(roster) == list(ROSTER_ORDER)
    assert all(spec.acronym == acronym for acronym, spec in roster.items())
    with pytest.raises(ValueError):
        spec_for("SVM")


def test_invalid_hyperparameter_value_raises():
    spec = spec_for("KNN").with_hyperparameters(n_neighbors=0)
    with pytest.raises(HyperparameterError):
        fit_classifier(spec, make_dataset())


# ---------------------------------------------------------------------------
# Class weighting and single-class data
# ---------------------------------------------------------------------------


def test_class_weights_balance_the_classes():
    labels = np.r_[np.zeros(90, dtype=int), np.ones(10, dtype=int)]
    weights = compute_class_weights(labels)
    assert weights.w0 == pytest.approx(100 / 180)
    assert weights.w1 == pytest.approx(5.0)
    assert 90 * weights.w0 + 10 * weights.w1 == pytest.approx(100.0)


def test_single_class_training_gives_constant_classifier():
    data = make_dataset()
    genuine_only = data.subset(np.flatnonzero(data.labels == 0))
    model = fit_classifier(make_spec("RF"), genuine_only)
    assert isinstance(model, ConstantClassifier)
    assert predict(model, data.features).tolist() == [0] * data.n_objects


def test_class_weighted_variant_needs_both_classes():
    data = make_dataset()
    fraud_only = data.subset(np.flatnonzero(data.labels == 1))
    with pytest.raises(DatasetError):
        fit_classifier(make_spec("LR-m"), fraud_only)


def test_weighted_naive_bayes_uses_uniform_priors():
    model = fit_classifier(make_spec("NB-m"), make_dataset(fraud_rate=0.05))
    assert np.allclose(np.exp(model.log_priors), [0.5, 0.5])


def test_weighting_raises_minority_recall():
    data = make_dataset(n=600, fraud_rate=0.05, seed=2)
    fraud = data.labels == 1
    plain = fit_classifier(make_spec("LR"), data)
    weighted = fit_classifier(make_spec("LR-m"), data)
    assert predict(weighted, data.features)[fraud].mean() >= predict(plain, data.features)[fraud].mean()


# ---------------------------------------------------------------------------
# Naive Bayes and logistic regression
# ---------------------------------------------------------------------------


def test_naive_bayes_separates_distant_gaussians():
    rng = np.random.default_rng(0)
    features = np.r_[rng.normal(0.0, 1.0, 50), rng.normal(10.0, 1.0, 50)][:, None]
    labels = np.r_[np.zeros(50, dtype=int), np.ones(50, dtype=int)]
    model = fit_classifier(spec_for("NB"), Dataset(features=features, labels=labels, feature_names=["x"]))
    assert predict(model, [[9.8]]).tolist() == [1]
    assert predict_score(model, [[9.8]])[0] > 0.99
    assert predict(model, [[0.3]]).tolist() == [0]


def test_logistic_regression_fits_separable_data():
    rng = np.random.default_rng(1)
    points = rng.uniform(-5.0, 5.0, (2000, 2))
    # at least one unit from the boundary x0 + x1 = 0
    points = points[np.abs(points.sum(axis=1)) / np.sqrt(2.0) >= 1.0][:200]
    labels = (points.sum(axis=1) > 0).astype(int)
    data = Dataset(features=points, labels=labels, feature_names=["x0", "x1"])
    model = fit_classifier(spec_for("LR"), data)
    assert (predict(model, data.features) == labels).mean() >= 0.99


def test_logistic_regression_with_zero_coefficients_scores_one_half():
    model = fit_classifier(spec_for("LR"), make_dataset(d=3))
    zeroed = model.model_copy(update={"coef": np.zeros(3), "intercept": 0.0})
    queries = np.random.default_rng(2).normal(size=(10, 3))
    assert predict_score(zeroed, queries).tolist() == [0.5] * 10
    assert predict(zeroed, queries).tolist() == [1] * 10


# ---------------------------------------------------------------------------
# KNN
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 3, 5])
def test_knn_matches_brute_force_oracle(k):
    train = make_dataset(n=80, seed=1)
    queries = np.random.default_rng(9).normal(size=(40, 3))
    model = fit_classifier(spec_for("KNN").with_hyperparameters(n_neighbors=k), train)
    expected = [knn_oracle(train, q, k) for q in queries]
    assert predict(model, queries).tolist() == expected


def test_weighted_knn_matches_weighted_oracle():
    train = make_dataset(n=80, fraud_rate=0.1, seed=5)
    queries = np.random.default_rng(6).normal(size=(40, 3))
    model = fit_classifier(spec_for("KNN-m").with_hyperparameters(n_neighbors=5), train)
    w = compute_class_weights(train.labels)
    expected = [knn_oracle(train, q, 5, w.w0, w.w1) for q in queries]
    assert predict(model, queries).tolist() == expected


def test_knn_distance_tie_goes_to_fraud():
    train = Dataset(features=[[0.0], [2.0]], labels=[0, 1], feature_names=["x"])
    model = fit_classifier(spec_for("KNN").with_hyperparameters(n_neighbors=1), train)
    assert predict(model, [[1.0]]).tolist() == [1]


def test_knn_vote_tie_goes_to_fraud():
    train = Dataset(features=[[0.0], [1.0]], labels=[0, 1], feature_names=["x"])
    model = fit_classifier(spec_for("KNN").with_hyperparameters(n_neighbors=2), train)
    assert predict_score(model, [[5.0]]).tolist() == [0.5]
    assert predict(model, [[5.0]]).tolist() == [1]


def test_knn_clamps_neighbors_to_training_size():
    train = make_dataset(n=10)
    model = fit_classifier(spec_for("KNN").with_hyperparameters(n_neighbors=50), train)
    assert isinstance(model, KNNClassifier)
    assert model.n_neighbors == 10


@pytest.mark.parametrize("acronym", ["KNN", "KNN-m"])
def test_knn_with_every_neighbor_follows_the_whole_training_vote(acronym):
    train = make_dataset(n=30, fraud_rate=0.3, seed=8)
    n0, n1 = train.class_counts()
    model = fit_classifier(spec_for(acronym).with_hyperparameters(n_neighbors=30), train)
    w = model.weights
    fraud, genuine = n1 * w.w1, n0 * w.w0
    expected = int(fraud / (fraud + genuine) >= 0.5)
    queries = np.random.default_rng(3).normal(size=(25, 3)) * 4.0
    assert predict(model, queries).tolist() == [expected] * 25
    if acronym == "KNN":
        assert expected == int(n1 >= n0)


# ---------------------------------------------------------------------------
# Forest
# ---------------------------------------------------------------------------


def test_forest_importances_sum_to_one():
    model = fit_classifier(make_spec("RF"), make_dataset())
    assert model.importances.sum() == pytest.approx(1.0)
    assert model.any_split


def test_forest_on_identical_labels_predicts_that_label():
    data = make_dataset()
    fraud_only = data.subset(np.flatnonzero(data.labels == 1))
    model = fit_random_forest(make_spec("RF"), fraud_only)
    assert not model.any_split
    assert predict(model, data.features).tolist() == [1] * data.n_objects


def test_forest_score_is_the_tree_vote_fraction():
    data = make_dataset()
    model = fit_classifier(make_spec("RF"), data)
    votes = model.tree_votes(data.features)
    assert votes.shape == (10, data.n_objects)
    assert np.allclose(predict_score(model, data.features), votes.mean(axis=0))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("acronym", ["KNN-m", "RF", "MLP-A"])
def test_saved_model_predicts_identically(tmp_path, acronym):
    data = make_dataset()
    model = fit_with_treatment(make_spec(acronym), data)
    path = save_model(model, tmp_path / "models" / f"{acronym}.joblib")
    restored = load_model(path)
    assert restored.spec == model.spec
    assert np.array_equal(predict_score(restored, data.features), predict_score(model, data.features))


def test_load_model_rejects_unknown_format(tmp_path):
    path = tmp_path / "old.joblib"
    joblib.dump({"format_version": 99, "model": None}, path)
    with pytest.raises(ValueError, match="format version"):
        load_model(path)


def test_bundle_prepares_raw_columns_like_the_training_run(tmp_path):
    raw = make_dataset(d=4, seed=3)
    scaler = fit_scaler(raw)
    kept = apply_scaler(scaler, raw).select_columns(np.array([True, False, True, True]))
    model = fit_classifier(make_spec("LR"), kept)
    path = save_model(model, tmp_path / "LR.joblib", input_features=kept.feature_names,
                      scaler=scaler, scaler_features=raw.feature_names)

    bundle = load_bundle(path)
    # same columns in another order, plus one the model never saw
    shuffled = Dataset(
        features=np.column_stack([raw.features[:, [3, 0, 2, 1]], np.ones(raw.n_objects)]),
        labels=raw.labels,
        feature_names=["V4", "V1", "V3", "V2", "extra"],
    )
    assert np.array_equal(bundle.prepare(shuffled), kept.features)
    assert np.array_equal(predict(bundle.model, bundle.prepare(shuffled)), predict(model, kept.features))


def test_bundle_reports_missing_columns(tmp_path):
    raw = make_dataset(d=3)
    model = fit_classifier(make_spec("NB"), raw)
    bundle = load_bundle(save_model(model, tmp_path / "NB.joblib", input_features=raw.feature_names))
    partial = raw.select_columns(np.array([True, True, False]))
    with pytest.raises(DatasetError, match="V3"):
        bundle.prepare(partial)
