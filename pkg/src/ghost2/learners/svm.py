"""Kernel SVM trained by sequential minimal optimization.

Working pairs are chosen as the maximal KKT violators (first-order
selection); each class has its own box bound C * weight(class). Scores
come from a sigmoid fitted to the training margins (Platt scaling).
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .base import LearnerConfig, Model, balanced_weights

log = logging.getLogger(__name__)

TOLERANCE = 1e-3
MAX_PASSES = 100
DEGREE = 3
TAU = 1e-12


def kernel_matrix(A, B, kernel: str, gamma: float, coef0: float = 0.0) -> np.ndarray:
    if kernel == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    dot = A @ B.T
    if kernel == "sigmoid":
        return np.tanh(gamma * dot + coef0)
    if kernel in ("polynomial", "poly"):
        return (gamma * dot + coef0) ** DEGREE
    if kernel == "linear":
        return dot
    raise ValueError(f"unknown kernel {kernel!r}")


def smo(K, y_pm, upper, tol=TOLERANCE, max_passes=MAX_PASSES):
    """Solve the SVM dual for labels in {-1, +1}.

    Returns (alpha, bias, converged). One pass is ``n`` pair updates.
    """
    n = len(y_pm)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a with Q = yy'K
    converged = False
    for _ in range(max_passes * n):
        yg = -y_pm * grad
        up = ((y_pm > 0) & (alpha < upper)) | ((y_pm < 0) & (alpha > 0))
        low = ((y_pm > 0) & (alpha > 0)) | ((y_pm < 0) & (alpha < upper))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        if yg[i] - yg[j] < tol:
            converged = True
            break
        yi, yj = y_pm[i], y_pm[j]
        curv = K[i, i] + K[j, j] - 2.0 * K[i, j]
        curv = curv if curv > 0 else TAU
        # move along y_i e_i - y_j e_j; step bounded by both boxes
        step = (yg[i] - yg[j]) / curv
        room_i = upper[i] - alpha[i] if yi > 0 else alpha[i]
        room_j = alpha[j] if yj > 0 else upper[j] - alpha[j]
        step = min(step, room_i, room_j)
        old_i, old_j = alpha[i], alpha[j]
        alpha[i] = old_i + yi * step
        alpha[j] = old_j - yj * step
        alpha[i] = min(max(alpha[i], 0.0), upper[i])
        alpha[j] = min(max(alpha[j], 0.0), upper[j])
        di, dj = alpha[i] - old_i, alpha[j] - old_j
        grad += y_pm * (K[:, i] * yi * di + K[:, j] * yj * dj)
    yg = -y_pm * grad
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        bias = float(yg[free].mean())
    else:
        up = ((y_pm > 0) & (alpha < upper)) | ((y_pm < 0) & (alpha > 0))
        low = ((y_pm > 0) & (alpha > 0)) | ((y_pm < 0) & (alpha < upper))
        hi = yg[up].max() if up.any() else 0.0
        lo = yg[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, converged


def platt(decision, y01, max_iter: int = 100):
    """Fit P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton's method with backtracking."""
    prior1 = float(np.sum(y01))
    prior0 = len(y01) - prior1
    hi, lo = (prior1 + 1.0) / (prior1 + 2.0), 1.0 / (prior0 + 2.0)
    t = np.where(y01 == 1, hi, lo)
    A, B = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))

    def objective(A, B):
        z = decision * A + B
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1.0) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = decision * A + B
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        q = 1.0 - p
        d2 = p * q
        h11 = 1e-12 + float(np.sum(decision * decision * d2))
        h22 = 1e-12 + float(np.sum(d2))
        h21 = float(np.sum(decision * d2))
        d1 = t - p
        g1 = float(np.sum(decision * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        stepsize = 1.0
        while stepsize >= 1e-10:
            nA, nB = A + stepsize * dA, B + stepsize * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * stepsize * gd:
                A, B, fval = nA, nB, nf
                break
            stepsize /= 2.0
        else:
            break
    return A, B


def train_svm(X, y, config: LearnerConfig) -> Model:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    params = dict(config.params)
    if len(np.unique(y)) < 2:
        prior = float(y.mean()) if n else 0.5
        return Model("svm", {"constant": np.array([prior])}, params, d, meta={"constant": True})
    C = float(params["C"])
    kernel = params["kernel"]
    gamma = 1.0 / d
    w0, w1 = config.class_weights or balanced_weights(y)
    upper = np.where(y == 1, C * w1, C * w0)
    y_pm = np.where(y == 1, 1.0, -1.0)
    K = kernel_matrix(X, X, kernel, gamma)
    alpha, bias, converged = smo(K, y_pm, upper)
    if not converged:
        log.warning("SMO stopped at the pass limit before reaching tolerance %g", TOLERANCE)
    support = alpha > 0
    coef = alpha[support] * y_pm[support]
    decision = K[:, support] @ coef + bias
    A, B = platt(decision, y)
    model_params = {
        "support": X[support],
        "coef": coef,
        "bias": np.array([bias]),
        "platt": np.array([A, B]),
    }
    meta = {"constant": False, "gamma": gamma, "converged": converged, "n_support": int(support.sum())}
    return Model("svm", model_params, params, d, meta=meta)


def svm_decision(model: Model, X) -> np.ndarray:
    K = kernel_matrix(X, model.params["support"], model.config["kernel"], model.meta["gamma"])
    return K @ model.params["coef"] + model.params["bias"][0]


def svm_scores(model: Model, X) -> np.ndarray:
    if model.meta.get("constant"):
        return np.full(X.shape[0], float(model.params["constant"][0]))
    A, B = model.params["platt"]
    z = A * svm_decision(model, X) + B
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(z))
