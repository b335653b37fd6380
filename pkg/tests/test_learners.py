import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from ghost2.errors import ModelFormatError, NonFiniteLoss, WidthMismatch
from ghost2.learners import (
    TUNABLES,
    HyperParamSpace,
    LearnerConfig,
    balanced_weights,
    dump_model,
    fit,
    load_model,
    model_digest,
    predict,
    read_model,
    write_model,
)
from ghost2.learners.ffnet import (
    descent_step,
    flatten,
    init_params,
    layer_sizes,
    loss_and_grad,
    sample_weights,
    train_ffnet,
    unflatten,
    weighted_bce,
)
from ghost2.learners.svm import kernel_matrix, smo
from ghost2.synthetic import blobs


def ffnet_config(layers=2, units=3, seed=0, **kw):
    return LearnerConfig("ffnet", {"layers": layers, "units_per_layer": units}, seed=seed, **kw)


def numeric_grad(params, X, y, w, h=1e-5):
    vec = flatten(params)
    out = np.empty_like(vec)
    for i in range(len(vec)):
        up, down = vec.copy(), vec.copy()
        up[i] += h
        down[i] -= h
        out[i] = (loss_and_grad(unflatten(up, params), X, y, w)[0]
                  - loss_and_grad(unflatten(down, params), X, y, w)[0]) / (2 * h)
    return out


def max_relative_error(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))))


def random_net(sizes, rng):
    # nonzero biases keep pre-activations off the ReLU kink at exactly 0
    return [(W, rng.normal(0, 0.1, size=b.shape)) for W, b in init_params(sizes, rng)]


def test_gradient_small_net():
    rng = np.random.default_rng(0)
    X, y = rng.random((10, 4)), rng.integers(0, 2, 10).astype(float)
    params = random_net(layer_sizes(4, 2, 3), rng)
    w = sample_weights(y, balanced_weights(y))
    _, grads = loss_and_grad(params, X, y, w)
    assert max_relative_error(flatten(grads), numeric_grad(params, X, y, w)) < 1e-4


def test_equal_weights_are_plain_cross_entropy():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=50) * 4
    y = rng.integers(0, 2, 50).astype(float)
    plain = np.mean(np.maximum(logits, 0) - y * logits + np.log1p(np.exp(-np.abs(logits))))
    assert weighted_bce(logits, y, np.ones(50)) == plain


def test_balanced_weights():
    assert balanced_weights([1, 0, 0, 0]) == (4 / 6, 2.0)
    assert balanced_weights([0, 0]) == (0.5, 1.0)


def test_double_weights_half_rate_same_step():
    rng = np.random.default_rng(2)
    X, y = rng.random((20, 3)), rng.integers(0, 2, 20).astype(float)
    params = init_params(layer_sizes(3, 2, 4), rng)
    w = sample_weights(y, (0.7, 1.9))
    zero = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    _, g1 = loss_and_grad(params, X, y, w)
    _, g2 = loss_and_grad(params, X, y, 2 * w)
    a, _ = descent_step(params, g1, zero, 0.01, 0.9)
    b, _ = descent_step(params, g2, zero, 0.005, 0.9)
    np.testing.assert_allclose(flatten(a), flatten(b), rtol=0, atol=1e-15)


def test_separable_blobs_fit_perfectly():
    data = blobs(n=80, d=2, gap=8.0, seed=3)
    model = fit(data, ffnet_config(seed=4))
    _, labels = predict(model, data.features)
    assert np.array_equal(labels, data.labels)


def test_ffnet_determinism_and_digest():
    data = blobs(n=40, d=3, seed=1)
    a = fit(data, ffnet_config(3, 5), rng_seed=9)
    b = fit(data, ffnet_config(3, 5), rng_seed=9)
    assert model_digest(a) == model_digest(b)
    assert model_digest(a) != model_digest(fit(data, ffnet_config(3, 5), rng_seed=10))


def test_single_class_is_constant():
    data = make_dataset(np.random.default_rng(0).random((6, 2)), [1] * 6)
    for kind in ("ffnet", "logit", "svm"):
        model = fit(data, HyperParamSpace().default(kind))
        scores, labels = predict(model, np.random.default_rng(1).random((4, 2)))
        assert np.all(scores == 1.0) and np.all(labels == 1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises():
    data = blobs(n=30, d=2, seed=0)
    with pytest.raises(NonFiniteLoss):
        train_ffnet(data.features * 1e150, data.labels, ffnet_config(), learning_rate=1e10)


def test_width_mismatch():
    model = fit(blobs(n=20, d=3), HyperParamSpace().default("logit"))
    with pytest.raises(WidthMismatch):
        predict(model, np.zeros((2, 4)))


@pytest.mark.parametrize("kind", ["ffnet", "logit", "dtree", "rforest", "svm"])
def test_scores_bounded_and_pure(kind):
    data = blobs(n=60, d=3, gap=1.0, seed=5)
    space = HyperParamSpace()
    model = fit(data, space.sample(kind, np.random.default_rng(2)), rng_seed=1)
    probe = np.random.default_rng(3).normal(size=(30, 3)) * 3
    s1, l1 = predict(model, probe)
    s2, l2 = predict(model, probe)
    assert np.all(np.isfinite(s1)) and np.all((s1 >= 0) & (s1 <= 1))
    assert np.array_equal(l1, (s1 >= 0.5).astype(int))
    assert np.array_equal(s1, s2) and np.array_equal(l1, l2)


@pytest.mark.parametrize("kind,params", [
    ("logit", {"penalty": "l1", "C": 1.0}),
    ("logit", {"penalty": "l2", "C": 0.1}),
    ("rforest", {"criterion": "entropy", "n_estimators": 25}),
    ("svm", {"C": 1.0, "kernel": "rbf"}),
    ("svm", {"C": 10.0, "kernel": "polynomial"}),
])
def test_traditional_learn_blobs(kind, params):
    train = blobs(n=80, d=2, gap=5.0, seed=6)
    test = blobs(n=40, d=2, gap=5.0, seed=7)
    model = fit(train, LearnerConfig(kind, params), rng_seed=0)
    _, labels = predict(model, test.features)
    assert np.mean(labels == test.labels) >= 0.95


@pytest.mark.parametrize("criterion", ["gini", "entropy"])
@pytest.mark.parametrize("splitter", ["best", "random"])
def test_dtree_memorizes(criterion, splitter):
    rng = np.random.default_rng(4)
    X = rng.random((60, 3))
    data = make_dataset(X, rng.integers(0, 2, 60))
    model = fit(data, LearnerConfig("dtree", {"criterion": criterion, "splitter": splitter}), rng_seed=1)
    assert np.array_equal(predict(model, X)[1], data.labels)


def test_one_tree_forest_is_a_tree():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        data = make_dataset(rng.random((50, 4)), rng.integers(0, 2, 50))
        forest = fit(data, LearnerConfig("rforest", {"criterion": "gini", "n_estimators": 1,
                                                     "bootstrap": False, "max_features": None}))
        tree = fit(data, LearnerConfig("dtree", {"criterion": "gini", "splitter": "best"}))
        probe = rng.random((40, 4))
        assert np.array_equal(predict(forest, probe)[1], predict(tree, probe)[1])


def test_smo_meets_kkt():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=40) > 0, 1.0, -1.0)
    K = kernel_matrix(X, X, "rbf", 0.5)
    upper = np.full(40, 1.0)
    alpha, b, converged = smo(K, y, upper)
    assert converged
    assert abs(alpha @ y) < 1e-8 and np.all((alpha >= 0) & (alpha <= upper + 1e-12))
    margin = y * (K @ (alpha * y) + b)
    tol = 1e-2
    assert np.all(margin[alpha < 1e-8] >= 1 - tol)
    assert np.all(margin[alpha > upper - 1e-8] <= 1 + tol)
    free = (alpha > 1e-8) & (alpha < upper - 1e-8)
    assert np.all(np.abs(margin[free] - 1) <= tol)


def test_serialize_round_trip(tmp_path):
    data = blobs(n=30, d=2, seed=2)
    for kind in ("ffnet", "logit", "dtree", "rforest", "svm"):
        model = fit(data, HyperParamSpace().default(kind), rng_seed=3)
        write_model(model, tmp_path / f"{kind}.gh2m")
        back = read_model(tmp_path / f"{kind}.gh2m")
        assert dump_model(back) == dump_model(model)
        probe = np.random.default_rng(0).normal(size=(10, 2))
        assert np.array_equal(predict(back, probe)[0], predict(model, probe)[0])


def test_serialize_rejects_garbage():
    with pytest.raises(ModelFormatError):
        load_model(b"NOPE\x01")
    blob = dump_model(fit(blobs(n=20), HyperParamSpace().default("logit")))
    with pytest.raises(ModelFormatError):
        load_model(blob[:4] + b"\x09" + blob[5:])
    with pytest.raises(ModelFormatError):
        load_model(blob[:-3])


def test_table_ranges():
    assert TUNABLES["ffnet"][0].levels() == (2, 3, 4, 5, 6)
    units = TUNABLES["ffnet"][1]
    assert units.levels(8)[0] == 3 and units.levels(8)[-1] == 20 and len(units.levels(8)) == 8
    assert HyperParamSpace().default("ffnet").params == {"layers": 4, "units_per_layer": 11}
    assert HyperParamSpace().default("svm").params == {"C": 0.1, "kernel": "sigmoid"}


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(TUNABLES)), st.integers(0, 2**31))
def test_samples_stay_in_range(kind, seed):
    space = HyperParamSpace()
    assert space.contains(space.sample(kind, np.random.default_rng(seed)))


def test_bad_config():
    with pytest.raises(ValueError):
        LearnerConfig("cnn", {})
    with pytest.raises(ValueError):
        ffnet_config(class_weights=(1.0, 0.0))
