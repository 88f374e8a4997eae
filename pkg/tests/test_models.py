import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mannerism.errors import DataError
from mannerism.metrics import auc
from mannerism.models import (
    KINDS, ModelWeights, TrainConfig, _lasso_smooth, _lasso_solve, backward_eliminate, columns_hash,
    fit_lasso, fit_lda, fit_max_margin, fit_model, fit_neural_net, init_network, kfold_indices,
    lasso_lambda_max, network_loss_and_grads, predict, select_lasso_lambda, sigmoid,
)

FAST = TrainConfig(lam=0.01, svm_iters=800, nn_epochs=400)


def separable_2d(rng, n=40):
    y = np.repeat([0.0, 1.0], n // 2)
    X = rng.normal(size=(n, 2)) * 0.5
    X[:, 0] += np.where(y == 1, 2.0, -2.0)
    X[:, 1] += np.where(y == 1, 1.0, -1.0)
    return X, y


def lasso_objective(X, y, beta, b0, lam, mode):
    return _lasso_smooth(X, y, beta, b0, mode)[0] + lam * np.abs(beta).sum()


# --- config & serialization --------------------------------------------------------------

def test_train_config_validation():
    for bad in ({"C": 0}, {"lam": -1.0}, {"nn_momentum": 1.0}, {"cv_folds": 1}, {"nn_lr": 0}):
        with pytest.raises(DataError):
            TrainConfig(**bad)
    cfg = TrainConfig().replace(C=2.0, lam_grid=[0.1, 1.0])
    assert cfg.C == 2.0 and cfg.lam_grid == (0.1, 1.0)


def test_model_weights_json_roundtrip(rng):
    X, y = separable_2d(rng)
    for kind in KINDS:
        m = fit_model(kind, X, y, "classification", FAST)
        m.columns_hash = columns_hash(["a", "b"])
        back = ModelWeights.from_json(m.to_json())
        np.testing.assert_array_equal(predict(back, X), predict(m, X))
        assert back.columns_hash == m.columns_hash and back.kind == kind


def test_unknown_kind_and_mode(rng):
    X, y = separable_2d(rng)
    with pytest.raises(DataError, match="kind"):
        fit_model("svm", X, y)
    with pytest.raises(DataError, match="mode"):
        fit_lasso(X, y, "ranking")
    with pytest.raises(DataError):
        fit_lasso(X, y[:-1], "classification", FAST)
    with pytest.raises(DataError, match="0/1"):
        fit_lasso(X, y + 1, "classification", FAST)


# --- LASSO -------------------------------------------------------------------------------------

def test_lasso_lambda_max_zero_solution(rng):
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] + 0.5 * rng.normal(size=60) > 0).astype(float)
    lmax = lasso_lambda_max(X, y, "classification")
    m = fit_lasso(X, y, "classification", TrainConfig(lam=lmax * 1.0001))
    assert np.all(m.coef == 0)
    # numerical stationarity check of the zero vector: the subgradient condition
    # |d smooth / d beta_j| <= lam holds, and any small step raises the objective
    b0 = m.intercept
    base = lasso_objective(X, y, np.zeros(5), b0, lmax * 1.0001, "classification")
    for j in range(5):
        for h in (1e-4, -1e-4):
            e = np.zeros(5)
            e[j] = h
            assert lasso_objective(X, y, e, b0, lmax * 1.0001, "classification") >= base
    # just below lambda_max something enters
    m = fit_lasso(X, y, "classification", TrainConfig(lam=lmax * 0.9, lasso_tol=1e-9))
    assert np.any(m.coef != 0)


def test_lasso_separated_1d_positive_slope():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0.0, 1.0])
    m = fit_lasso(X, y, "classification", TrainConfig(lam=1e-3))
    assert m.coef[0] > 0
    loss_pos = lasso_objective(X, y, m.coef, m.intercept, 1e-3, "classification")
    loss_neg = lasso_objective(X, y, -m.coef, m.intercept, 1e-3, "classification")
    assert loss_pos < loss_neg


def test_lasso_regression_recovers_slope(rng):
    x = rng.normal(size=(50, 1))
    y = 2.0 * x[:, 0]
    m = fit_lasso(x, y, "regression", TrainConfig(lam=1e-6, lasso_tol=1e-12, lasso_max_iter=20000))
    ols = np.linalg.lstsq(np.column_stack([x, np.ones(50)]), y, rcond=None)[0]
    assert m.coef[0] == pytest.approx(ols[0], abs=1e-3)
    assert m.coef[0] == pytest.approx(2.0, abs=1e-3)


def test_lasso_solution_is_optimal(rng):
    # KKT conditions of the composite problem at the returned point
    X = rng.normal(size=(80, 6))
    y = (X @ [1.5, -1, 0, 0, 0.5, 0] + 0.3 * rng.normal(size=80) > 0).astype(float)
    lam = 0.005
    beta, b0 = _lasso_solve(X, y, "classification", lam, 20000, 1e-12)
    _, g, g0 = _lasso_smooth(X, y, beta, b0, "classification")
    assert abs(g0) < 1e-6
    nz = beta != 0
    np.testing.assert_allclose(g[nz], -lam * np.sign(beta[nz]), atol=1e-6)
    assert np.all(np.abs(g[~nz]) <= lam + 1e-6)


def test_lasso_sparsity_monotone_in_lambda(rng):
    X = rng.normal(size=(90, 12))
    y = (X[:, :4] @ [1, -1, 0.5, 0.5] + rng.normal(size=90) > 0).astype(float)
    counts = [int(np.sum(fit_lasso(X, y, "classification", TrainConfig(lam=lam)).coef != 0))
              for lam in (1e-3, 1e-2, 1e-1, 1.0)]
    assert counts == sorted(counts, reverse=True)
    assert counts[-1] == 0 and counts[0] > 0


def test_lasso_predict_zero_model_is_half():
    m = ModelWeights("lasso", "classification", np.zeros(3), 0.0)
    np.testing.assert_array_equal(predict(m, np.ones((4, 3))), 0.5)
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_lasso_cv_selection(rng):
    X = rng.normal(size=(100, 8))
    y = (X[:, 0] - X[:, 1] + 0.5 * rng.normal(size=100) > 0).astype(float)
    cfg = TrainConfig()
    lam = select_lasso_lambda(X, y, "classification", cfg)
    assert lam in cfg.lam_grid and lam < 1.0
    assert select_lasso_lambda(X, y, "classification", cfg) == lam
    m = fit_lasso(X, y, "classification", cfg)
    assert m.hyperparams["lam"] == lam


def test_kfold_indices_partition_and_stratify(rng):
    y = np.array([0] * 7 + [1] * 13)
    folds = kfold_indices(y, 5, seed=3)
    assert sorted(np.concatenate(folds).tolist()) == list(range(20))
    assert all(1 <= y[f].sum() <= 3 for f in folds)
    assert [f.tolist() for f in folds] == [f.tolist() for f in kfold_indices(y, 5, seed=3)]


# --- max margin ------------------------------------------------------------------------------------

def test_max_margin_symmetric_pair():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0.0, 1.0])
    m = fit_max_margin(X, y, "classification", TrainConfig(C=100.0))
    s = predict(m, X)
    assert s[0] < 0 < s[1]
    # boundary -b0/w near 0
    assert abs(m.intercept / m.coef[0]) < 0.1


def test_max_margin_conflicting_duplicates_shrink_to_zero():
    X = np.array([[1.0], [1.0]])
    y = np.array([0.0, 1.0])
    m = fit_max_margin(X, y, "classification", TrainConfig(svm_iters=4000))
    # hinge on the doubled point is 2 at beta = b0 = 0 and never lower; only ||beta|| differs
    assert abs(m.coef[0]) < 0.05


def test_max_margin_regression_inside_tube_stays_zero(rng):
    X = rng.normal(size=(20, 3))
    y = 4.0 + 0.01 * rng.normal(size=20)
    m = fit_max_margin(X, y, "regression", TrainConfig(epsilon=0.5))
    assert np.all(m.coef == 0)
    np.testing.assert_allclose(predict(m, X), np.median(y))


def test_max_margin_zero_model_scores_zero():
    m = ModelWeights("max_margin", "classification", np.zeros(2), 0.0)
    np.testing.assert_array_equal(predict(m, np.ones((3, 2))), 0.0)


# --- LDA --------------------------------------------------------------------------------------------

def test_lda_direction_parallel_to_mean_difference(rng):
    mu0, mu1 = np.array([0.0, 0.0, 0.0]), np.array([1.0, 2.0, -1.0])
    X = np.vstack([rng.normal(size=(400, 3)) + mu0, rng.normal(size=(400, 3)) + mu1])
    y = np.repeat([0.0, 1.0], 400)
    w = fit_lda(X, y).coef
    d = mu1 - mu0
    assert w @ d / (np.linalg.norm(w) * np.linalg.norm(d)) >= 0.99


def test_lda_identical_means_and_missing_class(rng):
    X = np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(DataError, match="identical"):
        fit_lda(X, np.array([0.0, 0.0, 1.0, 1.0]))
    with pytest.raises(DataError, match="both classes"):
        fit_lda(X, np.zeros(4))


def test_lda_regression_exact(rng):
    X = rng.normal(size=(30, 4))
    coef = np.array([1.5, -2.0, 0.25, 3.0])
    m = fit_lda(X, X @ coef + 0.7, "regression")
    np.testing.assert_allclose(m.coef, coef, atol=1e-6)
    assert m.intercept == pytest.approx(0.7, abs=1e-6)


# --- neural net -------------------------------------------------------------------------------------

def _fd_check(layers, X, y, mode, h=1e-6):
    _, grads = network_loss_and_grads(layers, X, y, mode)
    worst = 0.0
    for li, (W, b) in enumerate(layers):
        for which, P in ((0, W), (1, b)):
            num = np.zeros_like(P)
            for idx in np.ndindex(P.shape):
                orig = P[idx]
                P[idx] = orig + h
                lp, _ = network_loss_and_grads(layers, X, y, mode)
                P[idx] = orig - h
                lm, _ = network_loss_and_grads(layers, X, y, mode)
                P[idx] = orig
                num[idx] = (lp - lm) / (2 * h)
            ana = grads[li][which]
            worst = max(worst, np.linalg.norm(ana - num) / max(np.linalg.norm(num), 1e-12))
    return worst


@pytest.mark.parametrize("mode", ["classification", "regression"])
@pytest.mark.parametrize("seed", range(3))
def test_network_gradients_finite_differences(mode, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(5, 4))
    y = (rng.uniform(size=5) > 0.5).astype(float) if mode == "classification" else rng.uniform(1, 7, 5)
    layers = init_network(4, 6, seed, 0.0 if mode == "classification" else 3.0)
    # random biases keep every unit off the ReLU kink, where differences are one-sided
    layers = [(W.copy(), b + rng.uniform(0.05, 0.2, size=b.shape)) for W, b in layers]
    assert _fd_check(layers, X, y, mode) <= 1e-3


def test_network_gradients_after_training(rng):
    X = rng.normal(size=(5, 4))
    y = np.array([0, 1, 1, 0, 1], float)
    m = fit_neural_net(X, y, "classification", TrainConfig(nn_hidden=6, nn_epochs=10))
    layers = [(W.copy(), b.copy()) for W, b in m.layers]
    assert _fd_check(layers, X, y, "classification") <= 1e-3


def test_network_constant_labels(rng):
    X = rng.normal(size=(20, 3))
    y = np.ones(20)
    m, hist = fit_neural_net(X, y, "classification", TrainConfig(nn_lr=0.02, nn_momentum=0.0, nn_epochs=1500),
                             return_history=True)
    assert np.all(np.diff(hist) <= 0)
    assert np.all(predict(m, X) >= 0.9)


def test_network_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float) * 2 - 1
    y = np.array([0, 1, 1, 0], float)
    m = fit_neural_net(X, y, "classification", TrainConfig(nn_epochs=2000, seed=1))
    assert np.array_equal(predict(m, X) > 0.5, y == 1)


def test_network_architecture(rng):
    X = rng.normal(size=(6, 122))
    m = fit_neural_net(X, rng.uniform(1, 7, 6), "regression", TrainConfig(nn_epochs=5))
    assert [W.shape for W, _ in m.layers] == [(122, 16), (16, 16), (16, 1)]
    assert np.all(predict(m, X) >= 0)  # ReLU output


# --- shared properties ----------------------------------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_separable_training_auc_is_one(kind, rng):
    X, y = separable_2d(rng)
    m = fit_model(kind, X, y, "classification", FAST)
    assert auc(predict(m, X), y) == 1.0


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("mode", ["classification", "regression"])
def test_fits_are_deterministic(kind, mode, rng):
    X = rng.normal(size=(30, 4))
    y = (X[:, 0] > 0).astype(float) if mode == "classification" else X[:, 0] * 2 + 4
    a = fit_model(kind, X, y, mode, FAST.replace(seed=5))
    b = fit_model(kind, X, y, mode, FAST.replace(seed=5))
    assert a.to_json() == b.to_json()


@pytest.mark.parametrize("kind", ["lasso", "max_margin", "lda"])
def test_zero_column_does_not_change_scores(kind, rng):
    X, y = separable_2d(rng)
    Xz = np.column_stack([X, np.zeros(len(y))])
    a = predict(fit_model(kind, X, y, "classification", FAST), X)
    b = predict(fit_model(kind, Xz, y, "classification", FAST), Xz)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_scores_invariant_to_row_order(seed):
    rng = np.random.default_rng(seed)
    X, y = separable_2d(rng, 20)
    perm = rng.permutation(20)
    for kind in ("lasso", "lda"):
        m = fit_model(kind, X, y, "classification", FAST)
        np.testing.assert_allclose(predict(m, X[perm]), predict(m, X)[perm])


def test_predict_dimension_mismatch(rng):
    X, y = separable_2d(rng)
    m = fit_lda(X, y)
    with pytest.raises(DataError, match="features"):
        predict(m, np.ones((3, 5)))


# --- backward elimination --------------------------------------------------------------------------

def test_backward_eliminate_drops_noise_first():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = 120
        y = np.repeat([0.0, 1.0], n // 2)
        X = rng.normal(size=(n, 5))
        X[:, :4] += np.outer(2 * y - 1, [0.8, 0.7, 0.6, 0.5])
        noise_col = int(rng.integers(5))
        X[:, [noise_col, 4]] = X[:, [4, noise_col]]
        first = set(range(5)) - set(backward_eliminate(X, y, 4, seed=seed))
        hits += first == {noise_col}
    assert hits >= 9


def test_backward_eliminate_errors_and_determinism(rng):
    X = rng.normal(size=(40, 4))
    y = (X[:, 0] > 0).astype(float)
    with pytest.raises(DataError):
        backward_eliminate(X, y, 4)
    assert backward_eliminate(X, y, 2, seed=1) == backward_eliminate(X, y, 2, seed=1)


def test_backward_eliminate_tie_drops_lowest_index():
    X = np.zeros((10, 3))
    assert backward_eliminate(X, np.arange(10) % 2, 2, scorer=lambda *a: 0.5) == [1, 2]
