"""CART decision trees and bootstrap random forests."""

from __future__ import annotations

import math

import numpy as np

from .base import LearnerConfig, Model

LEAF = -1


def _impurity(counts1, totals, criterion):
    """Impurity of nodes holding ``totals`` rows of which ``counts1`` are positive."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts1 / np.maximum(totals, 1), 0.0)
    if criterion == "gini":
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def _best_split_on(x, y, criterion):
    """Best threshold for one feature: (weighted child impurity, threshold) or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    distinct = np.flatnonzero(xs[1:] > xs[:-1])
    if len(distinct) == 0:
        return None
    n = len(ys)
    left_n = distinct + 1
    left_pos = np.cumsum(ys)[distinct]
    right_n = n - left_n
    right_pos = ys.sum() - left_pos
    score = (left_n * _impurity(left_pos, left_n, criterion)
             + right_n * _impurity(right_pos, right_n, criterion)) / n
    j = int(np.argmin(score))
    lo, hi = xs[distinct[j]], xs[distinct[j] + 1]
    return float(score[j]), _midpoint(lo, hi)


def _midpoint(lo, hi):
    t = lo + (hi - lo) / 2.0
    return float(lo) if t >= hi else float(t)


def _random_split_on(x, y, criterion, rng):
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return None
    t = rng.uniform(lo, hi)
    if t >= hi:
        t = lo
    left = x <= t
    n, nl = len(y), int(left.sum())
    if nl == 0 or nl == n:
        return None
    pos_l = y[left].sum()
    pos_r = y.sum() - pos_l
    score = (nl * _impurity(np.array([pos_l]), np.array([nl]), criterion)[0]
             + (n - nl) * _impurity(np.array([pos_r]), np.array([n - nl]), criterion)[0]) / n
    return float(score), float(t)


def grow_tree(X, y, criterion="gini", splitter="best", max_features=None, rng=None):
    """Grow an unpruned tree (min leaf size 1) and return it as flat arrays."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n, d = X.shape
    k = d if max_features is None else max(1, min(d, int(max_features)))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        yy = y[idx]
        value[node] = float(yy.mean())
        if len(idx) < 2 or yy.min() == yy.max():
            continue
        candidates = rng.permutation(d)[:k] if k < d else np.arange(d)
        best = None
        for f in candidates:
            if splitter == "best":
                found = _best_split_on(X[idx, f], yy, criterion)
            else:
                found = _random_split_on(X[idx, f], yy, criterion, rng)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            continue
        _, f, t = best
        go_left = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        l_node, r_node = new_node(), new_node()
        left[node], right[node] = l_node, r_node
        stack.append((r_node, idx[~go_left]))
        stack.append((l_node, idx[go_left]))
    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
    }


def tree_leaf_values(tree, X) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = tree["feature"][node] != LEAF
    while np.any(active):
        r = rows[active]
        nd = node[r]
        go_left = X[r, tree["feature"][nd]] <= tree["threshold"][nd]
        node[r] = np.where(go_left, tree["left"][nd], tree["right"][nd])
        active = tree["feature"][node] != LEAF
    return tree["value"][node]


def train_dtree(X, y, config: LearnerConfig, rng_seed=None) -> Model:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(config.seed if rng_seed is None else rng_seed)
    tree = grow_tree(X, y, config.params["criterion"], config.params["splitter"], rng=rng)
    return Model("dtree", tree, dict(config.params), X.shape[1], meta={"nodes": len(tree["feature"])})


def train_rforest(X, y, config: LearnerConfig, rng_seed=None) -> Model:
    """Bootstrap forest; ``bootstrap`` and ``max_features`` may be overridden in params."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(config.seed if rng_seed is None else rng_seed)
    n, d = X.shape
    count = int(config.params["n_estimators"])
    bootstrap = bool(config.params.get("bootstrap", True))
    max_features = config.params.get("max_features", "sqrt")
    if max_features == "sqrt":
        max_features = max(1, int(math.sqrt(d)))
    params = {}
    for t in range(count):
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree = grow_tree(X[idx], y[idx], config.params["criterion"], "best", max_features, rng)
        for key, arr in tree.items():
            params[f"t{t}.{key}"] = arr
    return Model("rforest", params, dict(config.params), d, meta={"trees": count})


def _trees(model: Model):
    for t in range(model.meta["trees"]):
        yield {key: model.params[f"t{t}.{key}"] for key in ("feature", "threshold", "left", "right", "value")}


def dtree_scores(model: Model, X) -> np.ndarray:
    return tree_leaf_values(model.params, X)


def rforest_scores(model: Model, X) -> np.ndarray:
    """Fraction of trees voting for the positive class."""
    votes = np.zeros(X.shape[0])
    for tree in _trees(model):
        votes += tree_leaf_values(tree, X) >= 0.5
    return votes / model.meta["trees"]
