import json

import numpy as np
import pytest

from finshap.errors import ConfigError, DataError, ShapeError
from finshap.models import (
    ForestHyper,
    GBTHyper,
    LogisticModel,
    ModelKind,
    SVMHyper,
    TrainedModel,
    load_model,
    log_loss,
    logistic_objective,
    rbf_kernel,
    save_model,
    smo,
    train_gbt,
    train_logistic,
    train_model,
    train_random_forest,
    train_svm_rbf,
)
from finshap.models.trees import ensemble_sum

KINDS = [k.value for k in ModelKind]
FAST_HYPER = {
    "Logistic": {},
    "RandomForest": {"n_trees": 15, "seed": 5},
    "GradientBoostedTrees": {"n_rounds": 25, "seed": 5},
    "SvmRbf": {},
}


def tree_sum(X, arrays, k):
    f, thr, left, right, val = arrays.tree(k)
    return ensemble_sum(X, f, thr, left, right, val, np.zeros(1, dtype=np.int32))


def toy(rng, n=120, F=6, noise=0.5):
    X = rng.normal(size=(n, F))
    y = (X[:, 0] - X[:, 1] + 0.5 * X[:, 2] * X[:, 3] + noise * rng.normal(size=n) > 0).astype(int)
    return X, y


# --- shared contract -------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_contract_and_roundtrip(kind, rng, tmp_path):
    X, y = toy(rng)
    m = train_model(kind, X, y, FAST_HYPER[kind])
    p = m.predict_proba(X)
    assert p.shape == (len(X),) and ((p >= 0) & (p <= 1)).all()
    assert np.array_equal(p, m.predict_proba(X))
    assert m.predict_proba(np.zeros((0, X.shape[1]))).shape == (0,)
    with pytest.raises(ShapeError):
        m.predict_proba(X[:, :-1])
    save_model(m, tmp_path / "m.json")
    again = load_model(tmp_path / "m.json")
    assert type(again) is type(m)
    assert np.array_equal(again.predict_proba(X), p)


@pytest.mark.parametrize("kind", KINDS)
def test_trainers_bit_deterministic(kind, rng):
    X, y = toy(rng)
    a = train_model(kind, X, y, FAST_HYPER[kind])
    b = train_model(kind, X, y, FAST_HYPER[kind])
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


@pytest.mark.parametrize("kind", KINDS)
def test_masked_proba_matches_materialized_hybrids(kind, rng):
    X, y = toy(rng, F=5)
    m = train_model(kind, X, y, FAST_HYPER[kind])
    masks = rng.random((12, 5)) < 0.5
    bg = X[:7]
    x = X[50]
    got = m.masked_proba(masks, x, bg)
    hybrid = np.where(masks[:, None, :], x, bg[None]).reshape(-1, 5)
    want = m.predict_proba(hybrid).reshape(12, 7)
    assert np.array_equal(got, want)


def test_rejects_bad_training_data(rng):
    X, y = toy(rng)
    X[3, 2] = np.nan
    with pytest.raises(DataError):
        train_logistic(X, y)
    with pytest.raises(DataError):
        train_gbt(np.ones((3, 2)), [0, 2, 1])
    with pytest.raises(ShapeError):
        train_gbt(np.ones((3, 2)), [0, 1])


def test_unknown_hyper_key():
    with pytest.raises(ConfigError):
        GBTHyper.from_dict({"depth": 3})


# --- logistic ----------------------------------------------------------------------


def test_logistic_zero_weights_give_half():
    m = LogisticModel(np.zeros(3), 0.0)
    assert np.array_equal(m.predict_proba(np.random.default_rng(0).normal(size=(5, 3))), np.full(5, 0.5))


def test_logistic_closed_form_prediction():
    w, b = np.array([0.5, -1.0]), 0.25
    m = LogisticModel(w, b)
    x = np.array([[2.0, 1.0]])
    assert m.predict_proba(x)[0] == pytest.approx(1 / (1 + np.exp(-(0.5 * 2 - 1 + 0.25))), abs=1e-15)


def test_logistic_separable_1d():
    x = np.linspace(-3, 3, 40)
    x = x[x != 0][:, None]
    y = (x[:, 0] > 0).astype(int)
    m = train_logistic(x, y, {"l2": 1e-6, "max_iters": 200})
    assert ((m.predict_proba(x) >= 0.5) == y.astype(bool)).all()


def test_logistic_duplicate_rows_same_minimizer(rng):
    X, y = toy(rng)
    a = train_logistic(X, y)
    b = train_logistic(np.vstack([X, X]), np.concatenate([y, y]))
    assert np.allclose(a.weights, b.weights, atol=1e-9) and abs(a.bias - b.bias) < 1e-9


def test_logistic_loss_trace_non_increasing(rng):
    X, y = toy(rng)
    m = train_logistic(X, y)
    trace = m.training_meta["loss_trace"]
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert m.training_meta["converged"]


def finite_difference_check(rng):
    X, y = toy(rng, n=60, F=4)
    errs = []
    for _ in range(10):
        params = rng.normal(size=5)
        _, grad = logistic_objective(params, X, y.astype(float), 0.7)
        fd = np.empty(5)
        h = 1e-6
        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            fd[j] = (logistic_objective(params + e, X, y.astype(float), 0.7)[0] - logistic_objective(params - e, X, y.astype(float), 0.7)[0]) / (2 * h)
        errs.append(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12))
    return max(errs)


def test_logistic_gradient_matches_finite_differences(rng):
    assert finite_difference_check(rng) < 1e-5


# --- forest -----------------------------------------------------------------------


def test_forest_single_unpruned_tree_fits_training_set(rng):
    X, y = toy(rng, noise=2.0)
    m = train_random_forest(X, y, ForestHyper(n_trees=1, bootstrap=False, max_depth=None, min_leaf=1, mtry=X.shape[1]))
    assert ((m.predict_proba(X) >= 0.5) == y.astype(bool)).all()


def test_forest_constant_labels(rng):
    X = rng.normal(size=(30, 3))
    m = train_random_forest(X, np.ones(30, dtype=int), {"n_trees": 5})
    assert (m.predict_proba(X) == 1.0).all()


def test_forest_mtry_too_large(rng):
    X, y = toy(rng)
    with pytest.raises(ConfigError):
        train_random_forest(X, y, {"mtry": X.shape[1] + 1})


def test_forest_workers_do_not_change_result(rng):
    X, y = toy(rng)
    a = train_random_forest(X, y, {"n_trees": 12, "seed": 9}, workers=1)
    b = train_random_forest(X, y, {"n_trees": 12, "seed": 9}, workers=4)
    assert a.trees.equals(b.trees)


def test_forest_probability_is_mean_of_leaf_frequencies(rng):
    X, y = toy(rng)
    m = train_random_forest(X, y, {"n_trees": 8, "seed": 1})
    leaf_vals = m.trees.value[m.trees.feature < 0]
    assert ((leaf_vals >= 0) & (leaf_vals <= 1)).all()
    per_tree = []
    for k in range(m.trees.n_trees()):
        per_tree.append(tree_sum(X, m.trees, k))
    assert np.allclose(np.mean(per_tree, axis=0), m.predict_proba(X), atol=1e-15)


# --- gradient boosting -----------------------------------------------------------------


def test_gbt_zero_rounds_is_prior(rng):
    X, y = toy(rng)
    m = train_gbt(X, y, {"n_rounds": 0})
    assert np.allclose(m.predict_proba(X), y.mean(), atol=1e-12)


def test_gbt_huge_lambda_stays_at_prior(rng):
    X, y = toy(rng)
    m = train_gbt(X, y, {"n_rounds": 5, "reg_lambda": 1e12})
    assert np.allclose(m.predict_proba(X), y.mean(), atol=1e-9)


def test_gbt_single_split_lowers_loss():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    m = train_gbt(X, y, {"n_rounds": 1, "max_depth": 1, "reg_lambda": 0.0, "min_child_weight": 0.0, "learning_rate": 0.3})
    before = log_loss(y.astype(float), np.zeros(4))
    after = log_loss(y.astype(float), m.margin(X))
    assert after < before
    assert m.trees.feature[0] == 0 and 1.0 <= m.trees.threshold[0] < 2.0


def test_gbt_bad_learning_rate(rng):
    X, y = toy(rng)
    with pytest.raises(ConfigError):
        train_gbt(X, y, {"learning_rate": 0.0})


def replayed_losses(model, X, y):
    """Training log-loss after each round, recomputed from the stored trees."""
    margin = np.full(len(X), model.base_margin)
    losses = [log_loss(y, margin)]
    for k in range(model.trees.n_trees()):
        margin = margin + tree_sum(X, model.trees, k)
        losses.append(log_loss(y, margin))
    return np.array(losses)


@pytest.mark.parametrize("lr", [0.1, 0.3])
def test_gbt_loss_non_increasing(lr, rng):
    X, y = toy(rng, noise=1.5)
    m = train_gbt(X, y, {"n_rounds": 30, "learning_rate": lr})
    losses = replayed_losses(m, X, y.astype(float))
    assert (np.diff(losses) <= 0).all()
    assert np.allclose(losses, m.training_meta["loss_trace"], rtol=0, atol=1e-12)


# --- svm ------------------------------------------------------------------------------


def kkt_violation(model, X, y, C):
    """Largest violation of the soft-margin KKT conditions on the training set."""
    yy = np.where(y > 0, 1.0, -1.0)
    f = model.decision_function(X)
    alpha = np.zeros(len(X))
    alpha[model.training_meta["support_indices"]] = np.abs(model.coef)
    m = yy * f
    worst = 0.0
    for a, mi in zip(alpha, m):
        if a <= 0:
            worst = max(worst, 1 - mi)
        elif a >= C:
            worst = max(worst, mi - 1)
        else:
            worst = max(worst, abs(mi - 1))
    return worst, alpha, yy


def test_svm_kkt_on_small_datasets(rng):
    for noise in (0.0, 1.0):
        X, y = toy(rng, n=60, F=4, noise=noise)
        hyper = SVMHyper(C=2.0, tol=1e-3)
        m = train_svm_rbf(X, y, hyper)
        assert m.training_meta["converged"]
        worst, alpha, yy = kkt_violation(m, X, y, 2.0)
        assert worst <= hyper.tol
        assert ((alpha >= 0) & (alpha <= 2.0)).all()
        assert abs(alpha @ yy) <= hyper.tol


def test_svm_two_points_symmetric():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    m = train_svm_rbf(X, [0, 1], {"gamma": 0.5})
    f = m.decision_function(X)
    assert len(m.coef) == 2
    assert f[0] == pytest.approx(-f[1], abs=1e-9)


def test_svm_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    m = train_svm_rbf(X, y, {"gamma": 1.0, "C": 10.0})
    assert ((m.decision_function(X) > 0) == y.astype(bool)).all()


def test_svm_bad_params(rng):
    X, y = toy(rng)
    with pytest.raises(ConfigError):
        train_svm_rbf(X, y, {"C": 0.0})
    with pytest.raises(ConfigError):
        train_svm_rbf(X, y, {"gamma": -1.0})


def test_smo_respects_box_and_equality(rng):
    X = rng.normal(size=(40, 2))
    y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
    res = smo(rbf_kernel(X, X, 0.5), y, 1.0, 1e-4, 100_000)
    assert res.converged
    assert ((res.alpha >= 0) & (res.alpha <= 1.0)).all()
    assert abs(res.alpha @ y) < 1e-9


def test_registry_covers_all_kinds():
    assert set(TrainedModel._registry) == set(ModelKind)
