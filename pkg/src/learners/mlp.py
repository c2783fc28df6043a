"""
Single-hidden-layer perceptron: ReLU hidden units, sigmoid output, (class-weighted)
cross-entropy loss with optional L2 penalty alpha / (2n) * ||W||^2.

Two optimizers:
  adam_sgd: mini-batch Adam (step 1e-3, decays 0.9 / 0.999, batch 128, 50 epochs)
  lbfgs:    full-batch L-BFGS-B (history 10, max 200 iterations, Wolfe line search)

Parameters are packed into one flat vector [W1, b1, W2, b2] so the same
loss_and_gradient drives both optimizers and the finite-difference check.
"""

import logging
from typing import List, Tuple

import numpy as np
import scipy.optimize
from scipy.special import expit

from src.errors import OptimizationError
from src.learners.base import FittedClassifier, non_negative_float, positive_int, sample_weights
from src.state import Dataset, ModelSpec

logger = logging.getLogger(__name__)

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPSILON = 1e-8


def n_parameters(n_inputs: int, hidden: int) -> int:
    return n_inputs * hidden + hidden + hidden + 1


def unpack(theta: np.ndarray, n_inputs: int, hidden: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    cut1 = n_inputs * hidden
    cut2 = cut1 + hidden
    cut3 = cut2 + hidden
    return (
        theta[:cut1].reshape(n_inputs, hidden),
        theta[cut1:cut2],
        theta[cut2:cut3],
        float(theta[cut3]),
    )


def init_parameters(n_inputs: int, hidden: int, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform init: each layer drawn from +-sqrt(6 / (fan_in + fan_out))."""
    bound1 = np.sqrt(6.0 / (n_inputs + hidden))
    bound2 = np.sqrt(6.0 / (hidden + 1))
    return np.concatenate([
        rng.uniform(-bound1, bound1, n_inputs * hidden),
        rng.uniform(-bound1, bound1, hidden),
        rng.uniform(-bound2, bound2, hidden),
        rng.uniform(-bound2, bound2, 1),
    ])


def loss_and_gradient(
    theta: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    hidden: int,
    alpha: float = 0.0,
) -> Tuple[float, np.ndarray]:
    n, n_inputs = X.shape
    W1, b1, W2, b2 = unpack(theta, n_inputs, hidden)

    pre = X @ W1 + b1
    act = np.maximum(pre, 0.0)
    raw = act @ W2 + b2

    loss = np.dot(w, np.logaddexp(0.0, raw) - y * raw) / n
    loss += 0.5 * alpha * (np.sum(W1 * W1) + np.dot(W2, W2)) / n

    delta_out = w * (expit(raw) - y) / n
    grad_W2 = act.T @ delta_out + alpha * W2 / n
    grad_b2 = delta_out.sum()
    delta_hidden = np.outer(delta_out, W2) * (pre > 0)
    grad_W1 = X.T @ delta_hidden + alpha * W1 / n
    grad_b1 = delta_hidden.sum(axis=0)

    grad = np.concatenate([grad_W1.ravel(), grad_b1, grad_W2, [grad_b2]])
    return float(loss), grad


class MLPClassifier(FittedClassifier):
    hidden_units: int
    theta: np.ndarray
    loss_trace: List[float]
    n_iter: int

    def _score(self, features: np.ndarray) -> np.ndarray:
        W1, b1, W2, b2 = unpack(self.theta, self.n_features, self.hidden_units)
        return expit(np.maximum(features @ W1 + b1, 0.0) @ W2 + b2)


def _fit_adam(
    spec: ModelSpec, theta: np.ndarray, X: np.ndarray, y: np.ndarray, w: np.ndarray,
    hidden: int, alpha: float, rng: np.random.Generator,
) -> Tuple[np.ndarray, List[float], int]:
    epochs = positive_int(spec, "epochs")
    batch_size = positive_int(spec, "batch_size")
    step = non_negative_float(spec, "learning_rate", strictly_positive=True)

    first = np.zeros_like(theta)
    second = np.zeros_like(theta)
    t = 0
    trace: List[float] = []
    n = X.shape[0]

    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            _, grad = loss_and_gradient(theta, X[batch], y[batch], w[batch], hidden, alpha)
            t += 1
            first = _ADAM_BETA1 * first + (1 - _ADAM_BETA1) * grad
            second = _ADAM_BETA2 * second + (1 - _ADAM_BETA2) * grad * grad
            corrected = step * np.sqrt(1 - _ADAM_BETA2 ** t) / (1 - _ADAM_BETA1 ** t)
            theta = theta - corrected * first / (np.sqrt(second) + _ADAM_EPSILON)
        loss, _ = loss_and_gradient(theta, X, y, w, hidden, alpha)
        if not np.isfinite(loss) or not np.isfinite(theta).all():
            raise OptimizationError(f"{spec.acronym}: non-finite state after epoch {epoch + 1}")
        trace.append(loss)
    return theta, trace, epochs


def _fit_lbfgs(
    spec: ModelSpec, theta: np.ndarray, X: np.ndarray, y: np.ndarray, w: np.ndarray,
    hidden: int, alpha: float,
) -> Tuple[np.ndarray, List[float], int]:
    max_iter = positive_int(spec, "max_iter")
    history = positive_int(spec, "history")
    trace: List[float] = [loss_and_gradient(theta, X, y, w, hidden, alpha)[0]]

    def objective(params: np.ndarray) -> Tuple[float, np.ndarray]:
        return loss_and_gradient(params, X, y, w, hidden, alpha)

    def record(params: np.ndarray) -> None:
        trace.append(objective(params)[0])

    result = scipy.optimize.minimize(
        objective,
        theta,
        method="L-BFGS-B",
        jac=True,
        callback=record,
        options={"maxiter": max_iter, "maxcor": history, "gtol": 1e-5},
    )
    if not np.isfinite(result.fun) or not np.isfinite(result.x).all():
        raise OptimizationError(f"{spec.acronym}: L-BFGS produced non-finite parameters")
    if not result.success:
        logger.warning("%s: L-BFGS stopped early: %s", spec.acronym, result.message)
    return result.x, trace, int(result.nit)


def fit_mlp(spec: ModelSpec, train: Dataset) -> MLPClassifier:
    hidden = positive_int(spec, "hidden_units")
    alpha = non_negative_float(spec, "alpha")
    _, w = sample_weights(spec, train.labels)
    X = train.features
    y = train.labels.astype(np.float64)

    rng = np.random.default_rng(spec.seed)
    theta = init_parameters(train.n_features, hidden, rng)

    if spec.optimizer == "adam_sgd":
        theta, trace, n_iter = _fit_adam(spec, theta, X, y, w, hidden, alpha, rng)
    else:
        theta, trace, n_iter = _fit_lbfgs(spec, theta, X, y, w, hidden, alpha)

    return MLPClassifier(
        spec=spec,
        n_features=train.n_features,
        prior_counts=train.class_counts(),
        hidden_units=hidden,
        theta=np.asarray(theta, dtype=np.float64),
        loss_trace=trace,
        n_iter=n_iter,
    )
