import numpy as np
from scipy.special import expit

from src.learners.base import FittedClassifier, non_negative_float
from src.state import Dataset, ModelSpec


class GaussianNBClassifier(FittedClassifier):
    """Gaussian class-conditional likelihoods, features independent given the class."""

    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)
    log_priors: np.ndarray  # (2,)

    def _joint_log_likelihood(self, features: np.ndarray) -> np.ndarray:
        joint = np.empty((features.shape[0], 2), dtype=np.float64)
        for c in (0, 1):
            var = self.variances[c]
            log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * var))
            quad = -0.5 * np.sum((features - self.means[c]) ** 2 / var, axis=1)
            joint[:, c] = self.log_priors[c] + log_norm + quad
        return joint

    def _score(self, features: np.ndarray) -> np.ndarray:
        joint = self._joint_log_likelihood(features)
        return expit(joint[:, 1] - joint[:, 0])


def fit_naive_bayes(spec: ModelSpec, train: Dataset) -> GaussianNBClassifier:
    smoothing = non_negative_float(spec, "var_smoothing", strictly_positive=True)
    X, y = train.features, train.labels

    max_var = float(np.max(np.var(X, axis=0))) if X.shape[1] else 0.0
    floor = smoothing * max_var if max_var > 0 else smoothing

    means = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.vstack([np.maximum(X[y == c].var(axis=0), floor) for c in (0, 1)])

    n0, n1 = train.class_counts()
    if spec.variant == "class_weighted":
        # n_c * w_c = n / 2 for both classes: weighted priors are uniform.
        log_priors = np.log(np.array([0.5, 0.5]))
    else:
        log_priors = np.log(np.array([n0, n1], dtype=np.float64) / train.n_objects)

    return GaussianNBClassifier(
        spec=spec,
        n_features=train.n_features,
        prior_counts=(n0, n1),
        means=means,
        variances=variances,
        log_priors=log_priors,
    )
