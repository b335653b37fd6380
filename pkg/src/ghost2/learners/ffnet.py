"""Fully connected ReLU network with a sigmoid output, trained by full-batch descent."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NonFiniteLoss
from .base import LearnerConfig, Model, balanced_weights

EPOCHS = 200
LEARNING_RATE = 0.01
MOMENTUM = 0.9


def layer_sizes(n_inputs: int, layers: int, units: int) -> list[int]:
    return [n_inputs] + [units] * layers + [1]


def init_params(sizes, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """Glorot-uniform weights, zero biases."""
    out = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        out.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return out


def forward(params, X):
    """Output logits plus the per-layer activations needed for backprop."""
    acts = [X]
    pre = []
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        pre.append(z)
        h = z if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return pre[-1][:, 0], acts, pre


def sample_weights(y, class_weights) -> np.ndarray:
    w0, w1 = class_weights
    return np.where(y == 1, w1, w0)


def weighted_bce(logits, y, w) -> float:
    """Mean of w * binary cross-entropy, computed stably from logits."""
    losses = np.maximum(logits, 0.0) - y * logits + np.log1p(np.exp(-np.abs(logits)))
    return float(np.mean(w * losses))


def loss_and_grad(params, X, y, w):
    logits, acts, pre = forward(params, X)
    loss = weighted_bce(logits, y, w)
    n = X.shape[0]
    delta = (w * (sigmoid(logits) - y) / n)[:, None]
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i:
            delta = (delta @ W.T) * (pre[i - 1] > 0)
    return loss, grads


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def flatten(params) -> np.ndarray:
    return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in params])


def unflatten(vec, like):
    out, pos = [], 0
    for W, b in like:
        w = vec[pos:pos + W.size].reshape(W.shape)
        pos += W.size
        out.append((w, vec[pos:pos + b.size].copy()))
        pos += b.size
    return out


def descent_step(params, grads, velocity, learning_rate, momentum):
    """One heavy-ball update; returns (params, velocity). momentum=0 is plain descent."""
    velocity = [(momentum * vW + gW, momentum * vb + gb)
                for (vW, vb), (gW, gb) in zip(velocity, grads)]
    params = [(W - learning_rate * vW, b - learning_rate * vb)
              for (W, b), (vW, vb) in zip(params, velocity)]
    return params, velocity


def train_ffnet(X, y, config: LearnerConfig, epochs: int = EPOCHS,
                learning_rate: float = LEARNING_RATE, rng_seed=None,
                momentum: float = MOMENTUM) -> Model:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    seed = config.seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)
    layers = int(config.params["layers"])
    units = int(config.params["units_per_layer"])
    d = X.shape[1]
    base = dict(config.params, epochs=epochs, learning_rate=learning_rate, momentum=momentum)

    if len(np.unique(y)) < 2:
        prior = float(y.mean()) if len(y) else 0.5
        return Model("ffnet", {"constant": np.array([prior])}, base, d, meta={"constant": True})

    weights = config.class_weights or balanced_weights(y)
    w = sample_weights(y, weights)
    params = init_params(layer_sizes(d, layers, units), rng)
    velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    for epoch in range(epochs):
        loss, grads = loss_and_grad(params, X, y, w)
        if not math.isfinite(loss):
            raise NonFiniteLoss(epoch, loss)
        params, velocity = descent_step(params, grads, velocity, learning_rate, momentum)
    final, _ = loss_and_grad(params, X, y, w)
    if not math.isfinite(final):
        raise NonFiniteLoss(epochs, final)
    flat = {}
    for i, (W, b) in enumerate(params):
        flat[f"W{i}"] = W
        flat[f"b{i}"] = b
    meta = {"epochs": epochs, "final_loss": final, "class_weights": list(weights), "constant": False}
    return Model("ffnet", flat, base, d, meta=meta)


def network_params(model: Model) -> list[tuple[np.ndarray, np.ndarray]]:
    count = sum(1 for k in model.params if k.startswith("W"))
    return [(model.params[f"W{i}"], model.params[f"b{i}"]) for i in range(count)]


def ffnet_scores(model: Model, X) -> np.ndarray:
    if model.meta.get("constant"):
        return np.full(X.shape[0], float(model.params["constant"][0]))
    logits, _, _ = forward(network_params(model), X)
    return sigmoid(logits)


def ffnet_loss(model: Model, X, y, params=None) -> float:
    """Training objective of ``model`` (or of replacement ``params``) on (X, y)."""
    y = np.asarray(y, dtype=np.float64)
    params = network_params(model) if params is None else params
    weights = model.meta.get("class_weights") or balanced_weights(y)
    logits, _, _ = forward(params, np.asarray(X, dtype=np.float64))
    return weighted_bce(logits, y, sample_weights(y, weights))
