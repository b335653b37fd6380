"""Shared learner types: hyper-parameter space, configs and fitted models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..dataset import NormParams, TEST_CLAMP
from ..errors import WidthMismatch

KINDS = ("ffnet", "logit", "dtree", "rforest", "svm")
TRADITIONAL = ("logit", "dtree", "rforest", "svm")


@dataclass(frozen=True)
class Param:
    """One tunable knob: either a list of choices or an inclusive int range."""

    name: str
    choices: tuple = ()
    low: int | None = None
    high: int | None = None

    @property
    def is_range(self) -> bool:
        return self.low is not None

    def levels(self, max_levels: int | None = None) -> tuple:
        if not self.is_range:
            return self.choices
        count = self.high - self.low + 1
        if max_levels is None or count <= max_levels:
            return tuple(range(self.low, self.high + 1))
        grid = np.linspace(self.low, self.high, max_levels)
        return tuple(dict.fromkeys(int(round(v)) for v in grid))

    def default(self):
        if self.is_range:
            return (self.low + self.high) // 2
        return self.choices[0]

    def sample(self, rng):
        if self.is_range:
            return int(rng.integers(self.low, self.high + 1))
        return self.choices[int(rng.integers(len(self.choices)))]

    def contains(self, value) -> bool:
        if self.is_range:
            return isinstance(value, (int, np.integer)) and self.low <= value <= self.high
        return value in self.choices


TUNABLES: dict[str, tuple[Param, ...]] = {
    "ffnet": (Param("layers", low=2, high=6), Param("units_per_layer", low=3, high=20)),
    "logit": (Param("penalty", ("l1", "l2")), Param("C", (0.1, 1.0, 10.0, 100.0))),
    "rforest": (Param("criterion", ("gini", "entropy")), Param("n_estimators", low=10, high=100)),
    "dtree": (Param("criterion", ("gini", "entropy")), Param("splitter", ("best", "random"))),
    "svm": (Param("C", (0.1, 1.0, 10.0, 100.0)), Param("kernel", ("sigmoid", "rbf", "polynomial"))),
}


@dataclass
class LearnerConfig:
    kind: str
    params: dict[str, Any]
    seed: int = 0
    class_weights: tuple[float, float] | None = None  # None -> balanced from the data

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.class_weights is not None and min(self.class_weights) <= 0:
            raise ValueError("class weights must be positive")

    def label(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({inner})"


class HyperParamSpace:
    """Per learner kind, the options each hyper-parameter may take."""

    def __init__(self, table: dict[str, tuple[Param, ...]] | None = None, kinds=None):
        table = TUNABLES if table is None else table
        kinds = tuple(kinds) if kinds is not None else tuple(table)
        self.table = {k: table[k] for k in kinds}

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(self.table)

    def params(self, kind: str) -> tuple[Param, ...]:
        return self.table[kind]

    def default(self, kind: str, seed: int = 0) -> LearnerConfig:
        return LearnerConfig(kind, {p.name: p.default() for p in self.table[kind]}, seed)

    def sample(self, kind: str, rng, seed: int = 0) -> LearnerConfig:
        return LearnerConfig(kind, {p.name: p.sample(rng) for p in self.table[kind]}, seed)

    def contains(self, config: LearnerConfig) -> bool:
        if config.kind not in self.table:
            return False
        params = self.table[config.kind]
        if set(config.params) != {p.name for p in params}:
            return False
        return all(p.contains(config.params[p.name]) for p in params)

    def size(self, max_levels: int | None = None) -> int:
        total = 0
        for params in self.table.values():
            count = 1
            for p in params:
                count *= len(p.levels(max_levels))
            total += count
        return total


def balanced_weights(labels) -> tuple[float, float]:
    """weight(c) = n / (2 * count(c)); a missing class gets weight 1."""
    labels = np.asarray(labels)
    n = len(labels)
    counts = (n - int(labels.sum()), int(labels.sum()))
    return tuple(n / (2.0 * c) if c else 1.0 for c in counts)


@dataclass(eq=False)
class Model:
    kind: str
    params: dict[str, np.ndarray]
    config: dict[str, Any]
    n_features: int
    meta: dict[str, Any] = field(default_factory=dict)
    norm: NormParams | None = None

    def check_width(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features:
            raise WidthMismatch(self.n_features, X.shape[1])
        return X

    def prepare(self, raw_features) -> np.ndarray:
        """Scale raw feature rows the way the training data was scaled."""
        if self.norm is None:
            return np.asarray(raw_features, dtype=np.float64)
        return self.norm.apply(raw_features, clamp=TEST_CLAMP)
