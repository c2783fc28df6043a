"""
Logistic regression fitted by weighted maximum likelihood with batch gradient ascent.

Objective (maximized):
    l(b) = (1/n) * sum_i w_i * [y_i log p_i + (1 - y_i) log(1 - p_i)] - (l2 / 2) * ||coef||^2

The step size starts at `learning_rate` and is halved whenever a step would lower l,
so the recorded log-likelihood trace never decreases.
"""

import logging
from typing import List

import numpy as np
from scipy.special import expit

from src.errors import OptimizationError
from src.learners.base import FittedClassifier, non_negative_float, positive_int, sample_weights
from src.state import Dataset, ModelSpec

logger = logging.getLogger(__name__)

_MAX_HALVINGS = 60


class LogisticRegressionClassifier(FittedClassifier):
    coef: np.ndarray
    intercept: float
    loglik_trace: List[float]
    n_iter: int
    converged: bool

    def _score(self, features: np.ndarray) -> np.ndarray:
        return expit(features @ self.coef + self.intercept)


def weighted_log_likelihood(
    beta: np.ndarray, design: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float
) -> float:
    """beta = [coef..., intercept]; design carries a trailing column of ones."""
    z = design @ beta
    # log p = -log(1 + e^-z), log(1 - p) = -log(1 + e^z)
    per_object = -(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z))
    return float(np.mean(w * per_object) - 0.5 * l2 * np.dot(beta[:-1], beta[:-1]))


def _gradient(beta: np.ndarray, design: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> np.ndarray:
    residual = w * (y - expit(design @ beta))
    grad = design.T @ residual / design.shape[0]
    grad[:-1] -= l2 * beta[:-1]
    return grad


def fit_logistic(spec: ModelSpec, train: Dataset) -> LogisticRegressionClassifier:
    l2 = non_negative_float(spec, "l2")
    step = non_negative_float(spec, "learning_rate", strictly_positive=True)
    max_iter = positive_int(spec, "max_iter")
    tol = non_negative_float(spec, "tol")

    _, w = sample_weights(spec, train.labels)
    y = train.labels.astype(np.float64)
    design = np.hstack([train.features, np.ones((train.n_objects, 1))])

    beta = np.zeros(design.shape[1])
    current = weighted_log_likelihood(beta, design, y, w, l2)
    trace = [current]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        grad = _gradient(beta, design, y, w, l2)
        if not np.isfinite(grad).all():
            raise OptimizationError(f"{spec.acronym}: non-finite gradient at iteration {iterations}")
        if np.max(np.abs(grad)) < tol:
            converged = True
            break

        for _ in range(_MAX_HALVINGS):
            candidate = beta + step * grad
            value = weighted_log_likelihood(candidate, design, y, w, l2)
            if not np.isfinite(value):
                raise OptimizationError(f"{spec.acronym}: non-finite log-likelihood at iteration {iterations}")
            if value >= current:
                break
            step *= 0.5
        else:
            # No ascent possible at machine precision: treat as converged.
            converged = True
            break

        beta, current = candidate, value
        trace.append(current)

    if not converged:
        logger.warning("%s: gradient ascent stopped after %d iterations without converging", spec.acronym, max_iter)

    return LogisticRegressionClassifier(
        spec=spec,
        n_features=train.n_features,
        prior_counts=train.class_counts(),
        coef=beta[:-1].copy(),
        intercept=float(beta[-1]),
        loglik_trace=trace,
        n_iter=iterations,
        converged=converged,
    )
