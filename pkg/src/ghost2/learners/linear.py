"""Penalized logistic regression fitted by (proximal) gradient descent."""

from __future__ import annotations

import numpy as np

from .base import LearnerConfig, Model, balanced_weights
from .ffnet import sigmoid

ITERATIONS = 500


def train_logit(X, y, config: LearnerConfig, iterations: int = ITERATIONS) -> Model:
    """Minimize mean weighted cross-entropy + penalty / (C * n).

    Matches the usual ``C * sum(loss) + penalty`` scaling, divided through
    by ``C * n``. The l1 penalty is handled with a soft-threshold step; the
    intercept is never penalized.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    penalty = config.params["penalty"]
    C = float(config.params["C"])
    if len(np.unique(y)) < 2:
        prior = float(y.mean()) if n else 0.5
        return Model("logit", {"constant": np.array([prior])}, dict(config.params), d,
                     meta={"constant": True})
    w0, w1 = config.class_weights or balanced_weights(y)
    sw = np.where(y == 1, w1, w0)
    # 1 / Lipschitz constant of the smooth part keeps plain steps stable
    lipschitz = 0.25 * max(w0, w1) * (float(np.max(np.sum(X * X, axis=1))) + 1.0)
    lam = 1.0 / (C * n)
    if penalty == "l2":
        lipschitz += lam
    step = 1.0 / lipschitz
    coef = np.zeros(d)
    bias = 0.0
    for _ in range(iterations):
        r = sw * (sigmoid(X @ coef + bias) - y) / n
        g = X.T @ r
        gb = float(r.sum())
        if penalty == "l2":
            coef = coef - step * (g + lam * coef)
        else:
            z = coef - step * g
            coef = np.sign(z) * np.maximum(np.abs(z) - step * lam, 0.0)
        bias -= step * gb
    return Model("logit", {"coef": coef, "bias": np.array([bias])}, dict(config.params), d,
                 meta={"constant": False, "iterations": iterations})


def logit_scores(model: Model, X) -> np.ndarray:
    if model.meta.get("constant"):
        return np.full(X.shape[0], float(model.params["constant"][0]))
    return sigmoid(X @ model.params["coef"] + model.params["bias"][0])
