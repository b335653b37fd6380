"""Data treatments applied to training data before learning.

* ``smote``  - instance engineering: interpolate new minority rows.
* ``smooth`` - label engineering: keep a sqrt(n) sample and relabel it by
  KD-tree leaf modes.
* ``ghost``  - boundary engineering: surround each minority row with
  concentric boxes of synthetic minority points.

Plans chain these steps, e.g. ``smooth>smote>ghost>ghost>smote+dodge``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import WarningDataset
from .errors import PlanSyntaxError, SingleClass, TooFewMinority, TreatmentError, TooFewRows
from .geometry import KdTree

log = logging.getLogger(__name__)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _minority(labels) -> tuple[int, int, int]:
    """(minority label, minority count, majority count); ties favour label 1."""
    ones = int(np.sum(labels))
    zeros = len(labels) - ones
    return (1, ones, zeros) if ones <= zeros else (0, zeros, ones)


# --- SMOTE -----------------------------------------------------------------

def smote(train: WarningDataset, k: int = 5, rng_seed=None) -> WarningDataset:
    """Oversample the minority class until both classes are the same size."""
    if k < 1:
        raise ValueError("k must be >= 1")
    label, n_min, n_maj = _minority(train.labels)
    if n_min == n_maj:
        return train
    if n_min < 2:
        raise TooFewMinority(f"SMOTE needs >= 2 minority rows, got {n_min}")
    rng = _rng(rng_seed)
    members = np.flatnonzero(train.labels == label)
    X = train.features[members]
    kk = min(k, n_min - 1)
    tree = KdTree(X, leaf_capacity=8)
    everyone = np.ones(n_min, dtype=bool)
    neighbours = []
    for j in range(n_min):
        everyone[j] = False
        neighbours.append(tree.query(X[j], kk, everyone))
        everyone[j] = True

    need = n_maj - n_min
    parents = rng.integers(0, n_min, size=need)
    picks = rng.integers(0, kk, size=need)
    gaps = rng.uniform(0.0, 1.0, size=need)
    while np.any(gaps == 0.0):  # keep the interpolation coefficient off the endpoint
        zero = gaps == 0.0
        gaps[zero] = rng.uniform(0.0, 1.0, size=int(zero.sum()))
    partners = np.array([neighbours[p][c] for p, c in zip(parents, picks)], dtype=np.int64)
    base = X[parents]
    synthetic = base + gaps[:, None] * (X[partners] - base)
    return train.append(synthetic, np.full(need, label), train.timestamps[members[parents]])


# --- SMOOTH ----------------------------------------------------------------

def smooth_sizes(n: int) -> tuple[int, int]:
    """(rows kept, KD-tree leaf capacity) for ``n`` training rows."""
    return math.ceil(math.sqrt(n)), math.ceil(n ** 0.25)


def _leaf_modes(tree: KdTree, labels) -> np.ndarray:
    out = np.array(labels, dtype=np.int64, copy=True)
    for leaf in tree.leaves:
        ones = int(out[leaf].sum())
        out[leaf] = 1 if ones * 2 > len(leaf) else 0
    return out


def smooth(train: WarningDataset, rng_seed=None, return_tree: bool = False):
    """Keep ceil(sqrt(n)) random rows and relabel each KD-tree leaf by its mode.

    Returns ``(dataset, labels_used)``; with ``return_tree`` the tree over
    the kept rows is appended. Mode ties go to label 0.
    """
    n = train.n
    if n < 2:
        raise TooFewRows(f"SMOOTH needs >= 2 rows, got {n}")
    keep, capacity = smooth_sizes(n)
    rng = _rng(rng_seed)
    chosen = np.sort(rng.choice(n, size=keep, replace=False))
    sample = train.take(chosen)
    tree = KdTree(sample.features, leaf_capacity=capacity)
    out = sample.replace(labels=_leaf_modes(tree, sample.labels))
    if return_tree:
        return out, keep, tree
    return out, keep


# --- GHOST -----------------------------------------------------------------

def box_count(minority_fraction: float) -> int:
    """Number of concentric boxes for a given minority share."""
    if not 0.0 < minority_fraction <= 1.0:
        raise ValueError(f"minority fraction must be in (0, 1], got {minority_fraction}")
    # small epsilon so exact powers of two are not lost to rounding
    return max(0, math.floor(math.log2(1.0 / minority_fraction) + 1e-12))


def box_surface(center, radius, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` points uniform on the surface of an axis-aligned L-inf box.

    ``radius`` may be a scalar or one half-width per dimension. A face is
    chosen in proportion to its area, then a point uniform on that face.
    """
    center = np.asarray(center, dtype=np.float64)
    d = center.shape[0]
    r = np.broadcast_to(np.asarray(radius, dtype=np.float64), (d,))
    if d == 1:
        signs = rng.choice([-1.0, 1.0], size=count)
        return center + signs[:, None] * r
    # face orthogonal to axis a has area prod_{j != a} 2 r_j, i.e. proportional to 1 / r_a
    flat = np.flatnonzero(r == 0)
    if len(flat) == 1:
        prob = np.zeros(d)
        prob[flat[0]] = 1.0
    elif len(flat) > 1:
        prob = np.full(d, 1.0 / d)
    else:
        w = -np.log(r)
        w = np.exp(w - w.max())
        prob = w / w.sum()
    axes = rng.choice(d, size=count, p=prob)
    pts = rng.uniform(-1.0, 1.0, size=(count, d)) * r
    signs = rng.choice([-1.0, 1.0], size=count)
    pts[np.arange(count), axes] = signs * r[axes]
    return center + pts


@dataclass(frozen=True)
class GhostParams:
    box_step: float = 0.01
    points_per_box: int | None = None  # None -> max(2 * min(d, 8), enough to flip the balance)

    def per_box(self, d: int, n_min: int = 1, n_maj: int = 0, boxes: int = 1) -> int:
        """Points per box; the default grows when needed to flip the class balance."""
        if self.points_per_box is not None:
            return self.points_per_box
        flip = math.ceil((n_maj - n_min + 1) / (n_min * boxes)) if boxes else 0
        return max(2 * min(d, 8), flip)


def ghost(train: WarningDataset, box_step: float = 0.01, points_per_box: int | None = None,
          rng_seed=None) -> WarningDataset:
    """Add concentric boxes of minority points around every minority row.

    Box ``i`` (1-based) has half-width ``i * box_step * range`` per
    dimension, ranges taken over the training features.
    """
    if box_step <= 0:
        raise ValueError("box_step must be positive")
    label, n_min, n_maj = _minority(train.labels)
    if n_min == 0:
        raise SingleClass("GHOST needs both classes present")
    boxes = box_count(n_min / train.n)
    if boxes == 0:
        return train
    rng = _rng(rng_seed)
    per_box = GhostParams(box_step, points_per_box).per_box(train.d, n_min, n_maj, boxes)
    span = train.features.max(axis=0) - train.features.min(axis=0)
    step = box_step * span
    members = np.flatnonzero(train.labels == label)
    new = []
    for i in members:
        for b in range(1, boxes + 1):
            new.append(box_surface(train.features[i], b * step, per_box, rng))
    new = np.vstack(new)
    stamps = np.repeat(train.timestamps[members], boxes * per_box)
    return train.append(new, np.full(len(new), label), stamps)


# --- plans -----------------------------------------------------------------

STEP_NAMES = ("smooth", "smote", "ghost")


@dataclass
class TreatmentPlan:
    steps: tuple[str, ...] = ()
    tune: bool = False
    smote_k: int = 5
    ghost: GhostParams = field(default_factory=GhostParams)
    labels_used: int | None = None

    def __post_init__(self):
        self.steps = tuple(self.steps)
        for s in self.steps:
            if s not in STEP_NAMES:
                raise PlanSyntaxError(f"unknown treatment step {s!r}")

    @classmethod
    def parse(cls, text: str) -> TreatmentPlan:
        """Read the one-line plan form, e.g. ``smooth>smote>ghost+dodge``."""
        text = text.strip().lower()
        tune = False
        if "+" in text:
            text, _, suffix = text.partition("+")
            if suffix.strip() != "dodge":
                raise PlanSyntaxError(f"only '+dodge' may follow the steps, got {suffix!r}")
            tune = True
        steps = tuple(s.strip() for s in text.split(">") if s.strip())
        if text.strip() and not steps:
            raise PlanSyntaxError(f"cannot parse plan {text!r}")
        if text.strip() in ("", "none", "identity"):
            steps = ()
        return cls(steps, tune)

    def format(self) -> str:
        body = ">".join(self.steps) if self.steps else "none"
        return body + ("+dodge" if self.tune else "")


A1_PLAN = "smooth>smote>ghost>ghost>smote+dodge"


def apply_plan(train: WarningDataset, plan: TreatmentPlan, rng_seed=None, lenient: bool = False):
    """Run the plan's steps left to right over the training data.

    Sets ``plan.labels_used`` and returns the treated dataset. With
    ``lenient`` a failing step is skipped with a warning instead of raised.
    """
    rng = _rng(rng_seed)
    data = train
    labels_used = train.n
    for step in plan.steps:
        try:
            if step == "smooth":
                data, labels_used = smooth(data, rng)
            elif step == "smote":
                data = smote(data, plan.smote_k, rng)
            elif step == "ghost":
                data = ghost(data, plan.ghost.box_step, plan.ghost.points_per_box, rng)
        except (TreatmentError, TooFewRows) as exc:
            if not lenient:
                raise
            log.warning("skipping %s on %s: %s", step, train.project, exc)
    plan.labels_used = labels_used
    return data
