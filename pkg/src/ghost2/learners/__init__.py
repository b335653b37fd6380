"""One train/predict contract over the feedforward net and the traditional baselines."""

from __future__ import annotations

import numpy as np

from ..dataset import WarningDataset
from ..errors import UnsupportedModel
from .base import (
    KINDS,
    TUNABLES,
    TRADITIONAL,
    HyperParamSpace,
    LearnerConfig,
    Model,
    Param,
    balanced_weights,
)
from .ffnet import EPOCHS, LEARNING_RATE, ffnet_scores, train_ffnet
from .linear import logit_scores, train_logit
from .serialize import dump_model, load_model, model_digest, read_model, write_model
from .svm import svm_scores, train_svm
from .trees import dtree_scores, rforest_scores, train_dtree, train_rforest

__all__ = [
    "KINDS", "TUNABLES", "TRADITIONAL", "HyperParamSpace", "LearnerConfig", "Model", "Param",
    "balanced_weights", "ffnet_train", "train_traditional", "fit", "predict", "scores",
    "dump_model", "load_model", "model_digest", "read_model", "write_model",
]


def ffnet_train(train: WarningDataset, config: LearnerConfig, epochs: int = EPOCHS,
                learning_rate: float = LEARNING_RATE, rng_seed=None, **kw) -> Model:
    return train_ffnet(train.features, train.labels, config, epochs, learning_rate, rng_seed, **kw)


def train_traditional(kind: str, config: LearnerConfig, train: WarningDataset, rng_seed=None) -> Model:
    X, y = train.features, train.labels
    if kind == "logit":
        return train_logit(X, y, config)
    if kind == "dtree":
        return train_dtree(X, y, config, rng_seed)
    if kind == "rforest":
        return train_rforest(X, y, config, rng_seed)
    if kind == "svm":
        return train_svm(X, y, config)
    raise UnsupportedModel(f"{kind!r} is not a traditional learner")


def fit(train: WarningDataset, config: LearnerConfig, rng_seed=None, **ffnet_options) -> Model:
    """Train whichever learner ``config`` names."""
    if config.kind == "ffnet":
        return ffnet_train(train, config, rng_seed=rng_seed, **ffnet_options)
    return train_traditional(config.kind, config, train, rng_seed)


_SCORERS = {
    "ffnet": ffnet_scores,
    "logit": logit_scores,
    "dtree": dtree_scores,
    "rforest": rforest_scores,
    "svm": svm_scores,
}


def scores(model: Model, features) -> np.ndarray:
    X = model.check_width(features)
    out = np.clip(_SCORERS[model.kind](model, X), 0.0, 1.0)
    return np.nan_to_num(out, nan=0.5)


def predict(model: Model, features) -> tuple[np.ndarray, np.ndarray]:
    """(scores in [0, 1], hard labels at threshold 0.5)."""
    s = scores(model, features)
    return s, (s >= 0.5).astype(np.int64)
