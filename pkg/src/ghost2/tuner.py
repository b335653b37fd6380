"""DODGE: hyper-parameter search with an epsilon-domination (tabu) rule.

Every option of every hyper-parameter carries a weight. After each
evaluation the options just used are rewarded when the outcome is new
(more than ``epsilon`` from every earlier outcome) and punished when it
lands inside an already-explored region.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dataset import WarningDataset
from .learners import HyperParamSpace, LearnerConfig, fit, predict

log = logging.getLogger(__name__)

BUDGET = 30
EPSILON = 0.2
MAX_LEVELS = 8
KIND = "__kind__"


def objective(y_true, y_pred) -> float:
    """Recall minus false-alarm rate; undefined halves count as 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    pos = y_true == 1
    tp = int(np.sum(pos & (y_pred == 1)))
    fp = int(np.sum(~pos & (y_pred == 1)))
    recall = tp / pos.sum() if pos.any() else 0.0
    false_alarm = fp / (~pos).sum() if (~pos).any() else 0.0
    return float(recall - false_alarm)


@dataclass
class DodgeState:
    epsilon: float = EPSILON
    budget: int = BUDGET
    weights: dict = field(default_factory=dict)
    log: list = field(default_factory=list)  # (LearnerConfig, objective)
    best: LearnerConfig | None = None
    best_score: float = -math.inf
    degenerate: bool = False

    def record(self, config, score):
        self.log.append((config, score))
        if score > self.best_score:
            self.best, self.best_score = config, score

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "config", "objective"])
            for i, (config, score) in enumerate(self.log):
                w.writerow([i, config.label(), repr(score)])


def _choices(space: HyperParamSpace):
    """Ordered (knob, options) pairs; a learner-kind knob appears when several kinds compete."""
    knobs = []
    if len(space.kinds) > 1:
        knobs.append(((KIND,), space.kinds))
    for kind in space.kinds:
        for p in space.params(kind):
            knobs.append(((kind, p.name), p.levels(MAX_LEVELS)))
    return knobs


def enumerate_configs(space: HyperParamSpace):
    """Every discretized config in the space, kind by kind."""
    for kind in space.kinds:
        params = space.params(kind)
        for values in itertools.product(*(p.levels(MAX_LEVELS) for p in params)):
            yield kind, dict(zip((p.name for p in params), values))


def _key(kind, params):
    return (kind,) + tuple(sorted(params.items()))


def search(space: HyperParamSpace, evaluate: Callable[[LearnerConfig], float],
           budget: int = BUDGET, epsilon: float = EPSILON, rng_seed=None) -> DodgeState:
    """Run the weighted tabu search over ``space`` using ``evaluate`` as the oracle."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    knobs = _choices(space)
    state = DodgeState(epsilon=epsilon, budget=budget)
    state.weights = {(name, v): 0 for name, options in knobs for v in options}
    universe = list(enumerate_configs(space))
    seen = set()
    explore = math.ceil(budget / 3)

    def pick(name, options, greedy):
        if not greedy:
            return options[int(rng.integers(len(options)))]
        w = np.array([state.weights[(name, v)] for v in options])
        top = np.flatnonzero(w == w.max())
        return options[int(top[rng.integers(len(top))])]

    def score_of(kind, params):
        total = sum(state.weights[((kind, name), v)] for name, v in params.items())
        if len(space.kinds) > 1:
            total += state.weights[((KIND,), kind)]
        return total

    for it in range(min(budget, len(universe))):
        greedy = it >= explore
        kind = space.kinds[0]
        if len(space.kinds) > 1:
            kind = pick((KIND,), space.kinds, greedy)
        params = {p.name: pick((kind, p.name), p.levels(MAX_LEVELS), greedy) for p in space.params(kind)}
        if _key(kind, params) in seen:
            # already explored: take the heaviest unexplored config instead
            fresh = [c for c in universe if _key(*c) not in seen]
            if greedy:
                mass = np.array([score_of(k, p) for k, p in fresh])
                top = np.flatnonzero(mass == mass.max())
                kind, params = fresh[int(top[rng.integers(len(top))])]
            else:
                kind, params = fresh[int(rng.integers(len(fresh)))]
        seen.add(_key(kind, params))
        config = LearnerConfig(kind, dict(params), seed=int(rng.integers(2**31)))
        score = float(evaluate(config))
        used = [((kind, name), v) for name, v in params.items()]
        if len(space.kinds) > 1:
            used.append(((KIND,), kind))
        dominated = any(abs(score - s) <= epsilon for _, s in state.log)
        for opt in used:
            state.weights[opt] += -1 if dominated else 1
        state.record(config, score)
    return state


def inner_split(data: WarningDataset, rng, fraction: float = 0.8):
    """Stratified shuffle split; falls back to a plain shuffle, then to None."""
    train_idx, val_idx = [], []
    for label in (0, 1):
        members = rng.permutation(np.flatnonzero(data.labels == label))
        if len(members) >= 2:
            n_val = max(1, int(round(len(members) * (1 - fraction))))
            n_val = min(n_val, len(members) - 1)
        else:
            n_val = 0
        val_idx.extend(members[:n_val].tolist())
        train_idx.extend(members[n_val:].tolist())

    def ok(tr, va):
        return (len(set(data.labels[tr].tolist())) == 2 and len(set(data.labels[va].tolist())) == 2)

    if ok(train_idx, val_idx):
        return data.take(sorted(train_idx)), data.take(sorted(val_idx))
    order = rng.permutation(data.n)
    cut = max(1, int(math.floor(data.n * fraction)))
    if cut < data.n and ok(order[:cut], order[cut:]):
        return data.take(np.sort(order[:cut])), data.take(np.sort(order[cut:]))
    return None


def dodge(space: HyperParamSpace, treated_train: WarningDataset, budget: int = BUDGET,
          epsilon: float = EPSILON, rng_seed=None, fit_fn=fit, **fit_options) -> DodgeState:
    """Tune on ``treated_train`` alone; ``state.best`` is the chosen config.

    ``fit_fn`` is injectable so callers can count or stub model fits.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    halves = inner_split(treated_train, rng)
    if halves is None:
        log.warning("inner split of %s lacks a class; returning a random config", treated_train.project)
        kind = space.kinds[int(rng.integers(len(space.kinds)))]
        state = DodgeState(epsilon=epsilon, budget=budget, degenerate=True)
        state.best = space.sample(kind, rng, seed=int(rng.integers(2**31)))
        return state
    inner_train, inner_val = halves

    def evaluate(config):
        model = fit_fn(inner_train, config, **fit_options)
        _, labels = predict(model, inner_val.features)
        return objective(inner_val.labels, labels)

    return search(space, evaluate, budget, epsilon, rng)
