import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from ghost2.errors import PlanSyntaxError, SingleClass, TooFewMinority, TooFewRows
from ghost2.geometry import KdTree
from ghost2.treatments import (
    A1_PLAN,
    GhostParams,
    TreatmentPlan,
    _leaf_modes,
    apply_plan,
    box_count,
    box_surface,
    ghost,
    smooth,
    smooth_sizes,
    smote,
)


def imbalanced(n, d, n_min, seed):
    rng = np.random.default_rng(seed)
    y = np.r_[np.ones(n_min, dtype=int), np.zeros(n - n_min, dtype=int)]
    return make_dataset(rng.random((n, d)), rng.permutation(y))


def on_segment(p, a, b, tol=1e-9):
    """Is p = a + t (b - a) for some t in [0, 1]?"""
    ab = b - a
    denom = ab @ ab
    if denom == 0:
        return np.allclose(p, a, atol=tol)
    t = (p - a) @ ab / denom
    return -tol <= t <= 1 + tol and np.allclose(p, a + t * ab, atol=tol)


def brute_neighbours(X, j, k):
    d2 = ((X - X[j]) ** 2).sum(axis=1)
    return sorted((i for i in range(len(X)) if i != j), key=lambda i: (d2[i], i))[:k]


# --- SMOTE -------------------------------------------------------------------

def test_smote_balanced_is_noop():
    data = make_dataset([[0.0], [1.0]], [0, 1])
    assert smote(data, rng_seed=0) is data


def test_smote_coincident_parents():
    data = make_dataset([[0.3, 0.3], [0.3, 0.3], [0.0, 1.0], [1.0, 0.0], [0.5, 0.9]], [1, 1, 0, 0, 0])
    out = smote(data, rng_seed=1)
    assert out.n == 6
    np.testing.assert_array_equal(out.features[5], [0.3, 0.3])


def test_smote_needs_two_minority():
    with pytest.raises(TooFewMinority):
        smote(make_dataset([[0.0], [1.0], [2.0]], [1, 0, 0]), rng_seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 40), st.integers(1, 5), st.integers(1, 7), st.integers(0, 2**31))
def test_smote_segments_and_balance(n, d, k, seed):
    n_min = max(2, n // 3)
    data = imbalanced(n, d, n_min, seed)
    out = smote(data, k=k, rng_seed=seed)
    zeros, ones = out.class_counts()
    assert zeros == ones
    np.testing.assert_array_equal(out.features[:n], data.features)
    label = 1 if n_min <= n - n_min else 0
    members = np.flatnonzero(data.labels == label)
    X = data.features[members]
    kk = min(k, len(members) - 1)
    hoods = [brute_neighbours(X, j, kk) for j in range(len(X))]
    for row, stamp in zip(out.features[n:], out.timestamps[n:]):
        assert any(on_segment(row, X[j], X[r]) and data.timestamps[members[j]] == stamp
                   for j in range(len(X)) for r in hoods[j])
    assert np.all(out.labels[n:] == label)


def test_smote_deterministic():
    data = imbalanced(30, 3, 8, 0)
    a, b = smote(data, rng_seed=5), smote(data, rng_seed=5)
    assert a.digest() == b.digest()


# --- SMOOTH ------------------------------------------------------------------

def test_smooth_sizes():
    assert smooth_sizes(16) == (4, 2)
    assert smooth_sizes(346) == (19, 5)
    assert smooth_sizes(22) == (5, 3)


def test_leaf_mode_of_three():
    tree = KdTree(np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]]), leaf_capacity=3)
    out = _leaf_modes(tree, [1, 1, 0, 0, 1, 0])
    assert out.tolist() == [1, 1, 1, 0, 0, 0]


def test_smooth_tiny():
    with pytest.raises(TooFewRows):
        smooth(make_dataset([[0.0]], [1]), rng_seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.integers(1, 6), st.integers(0, 2**31))
def test_smooth_budget_and_leaf_modes(n, d, seed):
    data = imbalanced(n, d, max(1, n // 3), seed)
    out, used, tree = smooth(data, rng_seed=seed, return_tree=True)
    keep, cap = smooth_sizes(n)
    assert out.n == used == keep == math.ceil(math.sqrt(n))
    assert all(len(leaf) <= cap for leaf in tree.leaves)
    # leaf mode recomputed from the original labels of the kept rows
    rows = {tuple(r): i for i, r in enumerate(data.features)}
    original = np.array([data.labels[rows[tuple(r)]] for r in out.features])
    for leaf in tree.leaves:
        ones = original[leaf].sum()
        expect = 1 if 2 * ones > len(leaf) else 0
        assert np.all(out.labels[leaf] == expect)


def test_smooth_tie_goes_to_zero():
    data = make_dataset([[0.0], [0.1], [0.2], [0.3]], [1, 0, 1, 0])
    for seed in range(20):
        out, _, tree = smooth(data, rng_seed=seed, return_tree=True)
        assert len(tree.leaves) == 1
        rows = out.features[:, 0]
        ones = sum(data.labels[int(round(r * 10))] for r in rows)
        if ones * 2 == len(rows):
            assert np.all(out.labels == 0)


# --- GHOST -------------------------------------------------------------------

@pytest.mark.parametrize("frac,boxes", [(0.5, 1), (0.1, 3), (0.4, 1), (0.25, 2), (0.125, 3),
                                        (0.6, 0), (1.0, 0), (1 / 1024, 10)])
def test_box_count(frac, boxes):
    assert box_count(frac) == boxes


def test_default_points_per_box():
    assert GhostParams().per_box(3) == 6
    assert GhostParams().per_box(260) == 16
    assert GhostParams(points_per_box=4).per_box(260, 1, 1000, 1) == 4


def test_ghost_single_class():
    with pytest.raises(SingleClass):
        ghost(make_dataset([[0.0], [1.0]], [0, 0]), rng_seed=0)


def test_box_surface_on_boundary():
    rng = np.random.default_rng(0)
    r = np.array([0.1, 0.02, 0.5])
    pts = box_surface(np.array([0.5, 0.5, 0.5]), r, 500, rng)
    rel = np.abs(pts - 0.5) / r
    assert np.all(rel <= 1 + 1e-12)
    assert np.allclose(rel.max(axis=1), 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 60), st.integers(1, 12), st.floats(0.02, 0.5), st.integers(0, 2**31))
def test_ghost_boxes_and_reversal(n, d, frac, seed):
    n_min = max(1, min(n // 2, int(round(n * frac))))
    data = imbalanced(n, d, n_min, seed)
    label = 1 if n_min <= n - n_min else 0
    boxes = box_count(n_min / n)
    out = ghost(data, rng_seed=seed)
    added = out.n - n
    if boxes == 0:
        assert out is data
        return
    per = GhostParams().per_box(d, n_min, n - n_min, boxes)
    assert added == n_min * boxes * per
    assert np.all(out.labels[n:] == label)
    assert int(np.sum(out.labels == label)) > int(np.sum(out.labels != label))
    # every new point sits on one of its parent's box surfaces
    step = 0.01 * (data.features.max(axis=0) - data.features.min(axis=0))
    parents = np.repeat(np.flatnonzero(data.labels == label), boxes * per)
    which = np.tile(np.repeat(np.arange(1, boxes + 1), per), n_min)
    for p, b, row in zip(parents, which, out.features[n:]):
        gap = np.abs(row - data.features[p])
        r = b * step
        assert np.all(gap <= r + 1e-12)
        assert np.any(np.isclose(gap, r, atol=1e-12))


# --- plans -------------------------------------------------------------------

def test_plan_text():
    plan = TreatmentPlan.parse(A1_PLAN)
    assert plan.steps == ("smooth", "smote", "ghost", "ghost", "smote") and plan.tune
    assert plan.format() == A1_PLAN
    assert TreatmentPlan.parse("none").steps == ()
    assert TreatmentPlan.parse("ghost").format() == "ghost"
    for bad in ("smooth>warp", "smote+hyperopt"):
        with pytest.raises(PlanSyntaxError):
            TreatmentPlan.parse(bad)


def test_identity_plans():
    data = imbalanced(20, 2, 10, 0)
    plan = TreatmentPlan(())
    assert apply_plan(data, plan, 0) is data and plan.labels_used == 20
    assert apply_plan(data, TreatmentPlan(("smote",)), 0) is data


def test_a1_replay():
    data = imbalanced(100, 5, 30, 3)
    plan = TreatmentPlan.parse(A1_PLAN)
    out = apply_plan(data, plan, 11)
    rng = np.random.default_rng(11)
    step, used = smooth(data, rng)
    for fn in (smote, ghost, ghost, smote):
        step = fn(step, rng_seed=rng)
    assert plan.labels_used == used == 10
    assert out.n == step.n
    assert out.digest() == step.digest()


def test_plan_deterministic():
    data = imbalanced(80, 4, 20, 9)
    a = apply_plan(data, TreatmentPlan.parse(A1_PLAN), 4, lenient=True)
    b = apply_plan(data, TreatmentPlan.parse(A1_PLAN), 4, lenient=True)
    assert a.digest() == b.digest()


def test_lenient_skips_failing_step():
    data = make_dataset([[0.0], [0.5], [1.0]], [1, 0, 0])
    with pytest.raises(TooFewMinority):
        apply_plan(data, TreatmentPlan(("smote",)), 0)
    out = apply_plan(data, TreatmentPlan(("smote", "ghost")), 0, lenient=True)
    assert out.n > 3


def test_kdtree_reused_by_smooth():
    data = imbalanced(50, 2, 10, 0)
    out, _, tree = smooth(data, rng_seed=0, return_tree=True)
    assert isinstance(tree, KdTree) and tree.m == out.n
