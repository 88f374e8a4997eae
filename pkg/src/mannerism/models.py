"""Predictors of pattern meaningfulness, written from scratch on numpy.

Four model kinds, each with a classification and a regression mode:

``lasso``
    Classification minimizes ``mean((y - sigmoid(X b + c))**2) + lam*|b|_1``
    (squared error on the sigmoid output); regression is plain LASSO,
    ``mean((y - X b - c)**2) / 2 + lam*|b|_1``.  Solved by accelerated
    proximal gradient with backtracking and function-value restarts.
``max_margin``
    Linear SVM (hinge) / SVR (epsilon-insensitive) with an L2 penalty of
    ``|b|^2 / (2 C)`` on the summed loss, by subgradient descent with
    suffix-averaged iterates.
``lda``
    Fisher discriminant; regression mode is ordinary least squares.
``neural_net``
    Fully connected p -> 16 -> 16 -> 1 with ReLU hidden units, sigmoid +
    cross-entropy (classification) or ReLU + squared error (regression)
    output, trained by full-batch gradient descent with momentum.

Labels for classification are 0/1 with 1 = meaningful.  Intercepts are
never penalized.  Every fit is deterministic given ``TrainConfig.seed``.
"""

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError, NumericalError
from .metrics import auc, pearson

KINDS = ("lasso", "max_margin", "lda", "neural_net")
LINEAR_KINDS = ("lasso", "max_margin", "lda")
MODES = ("classification", "regression")
LDA_RIDGE = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    lam: float = None  # None: choose by cross-validation over lam_grid
    lam_grid: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    cv_folds: int = 5
    lasso_max_iter: int = 5000
    lasso_tol: float = 1e-6
    C: float = 1.0
    epsilon: float = 0.1
    svm_iters: int = 2000
    svm_step: float = 0.5
    nn_hidden: int = 16
    nn_lr: float = 0.05
    nn_momentum: float = 0.9
    nn_epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        positive = {
            "C": self.C, "epsilon": self.epsilon, "svm_step": self.svm_step, "nn_lr": self.nn_lr,
            "lasso_tol": self.lasso_tol,
        }
        bad = [k for k, v in positive.items() if not v > 0]
        if self.lam is not None and not self.lam > 0:
            bad.append("lam")
        if min(self.cv_folds - 1, self.lasso_max_iter, self.svm_iters, self.nn_hidden, self.nn_epochs) < 1:
            bad.append("iteration/fold counts")
        if not 0 <= self.nn_momentum < 1:
            bad.append("nn_momentum")
        if bad:
            raise DataError(f"invalid training config: {', '.join(bad)}")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        d["lam_grid"] = tuple(d["lam_grid"])
        return TrainConfig(**d)


@dataclass(eq=False)
class ModelWeights:
    kind: str
    mode: str
    coef: np.ndarray = None  # linear kinds
    intercept: float = 0.0
    layers: list = None  # neural_net: [(W, b), ...]
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0
    columns_hash: str = ""

    @property
    def n_features(self):
        if self.kind == "neural_net":
            return self.layers[0][0].shape[0]
        return len(self.coef)

    def to_json(self):
        d = {
            "kind": self.kind,
            "mode": self.mode,
            "intercept": float(self.intercept),
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "columns_hash": self.columns_hash,
        }
        if self.coef is not None:
            d["coef"] = [float(v) for v in self.coef]
        if self.layers is not None:
            d["layers"] = [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]
        return d

    @classmethod
    def from_json(cls, d):
        layers = None
        if d.get("layers") is not None:
            layers = [(np.array(L["W"], float), np.array(L["b"], float)) for L in d["layers"]]
        coef = np.array(d["coef"], float) if d.get("coef") is not None else None
        return cls(d["kind"], d["mode"], coef, d.get("intercept", 0.0), layers,
                   d.get("hyperparams", {}), d.get("seed", 0), d.get("columns_hash", ""))


def columns_hash(names):
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


def _check_xy(X, y):
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise DataError(f"X {X.shape} and y ({len(y)}) do not match")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("non-finite values in training data")
    return X, y


def _check_mode(mode):
    if mode not in MODES:
        raise DataError(f"unknown mode {mode!r}")


def _check_labels(y):
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("classification labels must be 0/1")


def sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


# --- LASSO ---------------------------------------------------------------------

def _lasso_smooth(X, y, beta, b0, mode):
    """Smooth loss and its gradient w.r.t. (beta, b0)."""
    n = len(y)
    z = X @ beta + b0
    if mode == "classification":
        s = sigmoid(z)
        r = s - y
        loss = float(np.dot(r, r)) / n
        w = 2.0 / n * r * s * (1.0 - s)
    else:
        r = z - y
        loss = 0.5 * float(np.dot(r, r)) / n
        w = r / n
    return loss, X.T @ w, float(w.sum())


def lasso_lambda_max(X, y, mode):
    """Smallest lam for which beta = 0 (with the best intercept) is stationary."""
    X, y = _check_xy(X, y)
    ybar = y.mean()
    if mode == "classification":
        g = 2.0 / len(y) * ybar * (1 - ybar) * (X.T @ (y - ybar))
    else:
        g = X.T @ (y - ybar) / len(y)
    return float(np.max(np.abs(g)))


def _soft(x, t):
    return np.sign(x) * np.maximum(0.0, np.abs(x) - t)


def _lasso_solve(X, y, mode, lam, max_iter, tol, warm=None):
    if warm is not None:
        beta, b0 = warm[0].copy(), float(warm[1])
    else:
        ybar = float(y.mean())
        if mode == "classification":
            yb = min(max(ybar, 1e-6), 1 - 1e-6)
            b0 = math.log(yb / (1 - yb))
        else:
            b0 = ybar
        beta = np.zeros(X.shape[1])
    # momentum iterate
    zb, zb0 = beta.copy(), b0
    t_k = 1.0
    step = 1.0
    obj = _lasso_smooth(X, y, beta, b0, mode)[0] + lam * np.abs(beta).sum()
    for it in range(max_iter):
        lz, gz, gz0 = _lasso_smooth(X, y, zb, zb0, mode)
        while True:
            nb = _soft(zb - step * gz, step * lam)
            nb0 = zb0 - step * gz0
            ln, _, _ = _lasso_smooth(X, y, nb, nb0, mode)
            d, d0 = nb - zb, nb0 - zb0
            if ln <= lz + np.dot(gz, d) + gz0 * d0 + (np.dot(d, d) + d0 * d0) / (2 * step) + 1e-15:
                break
            step *= 0.5
            if step < 1e-20:
                raise NumericalError("lasso line search failed")
        new_obj = ln + lam * np.abs(nb).sum()
        if not math.isfinite(new_obj):
            raise NumericalError(f"non-finite lasso loss at iteration {it}")
        if new_obj > obj:
            if t_k == 1.0:
                break  # no progress even without momentum
            # restart momentum from the last accepted point
            zb, zb0, t_k = beta.copy(), b0, 1.0
            continue
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t_k * t_k))
        mom = (t_k - 1) / t_next
        change = max(np.max(np.abs(nb - beta), initial=0.0), abs(nb0 - b0))
        zb = nb + mom * (nb - beta)
        zb0 = nb0 + mom * (nb0 - b0)
        beta, b0, obj, t_k = nb, nb0, new_obj, t_next
        step = min(1.0, step * 2.0)
        if change <= tol * (1.0 + max(np.max(np.abs(beta), initial=0.0), abs(b0))):
            break
    return beta, b0


def fit_lasso(X, y, mode="classification", cfg=None):
    cfg = cfg or TrainConfig()
    _check_mode(mode)
    X, y = _check_xy(X, y)
    if mode == "classification":
        _check_labels(y)
    lam = cfg.lam
    if lam is None:
        lam = select_lasso_lambda(X, y, mode, cfg)
    beta, b0 = _lasso_solve(X, y, mode, lam, cfg.lasso_max_iter, cfg.lasso_tol)
    return ModelWeights("lasso", mode, beta, b0, hyperparams={"lam": lam}, seed=cfg.seed)


def kfold_indices(y, k, seed, stratify=True):
    """Deterministic k-fold test-index lists; stratified by label when asked."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    folds = [[] for _ in range(k)]
    groups = [np.flatnonzero(y == v) for v in np.unique(y)] if stratify else [np.arange(len(y))]
    offset = 0
    for g in groups:
        g = rng.permutation(g)
        for i, idx in enumerate(g):
            folds[(i + offset) % k].append(int(idx))
        offset += len(g)
    return [np.array(sorted(f), int) for f in folds]


def cv_score(fit_fn, X, y, mode, k, seed):
    """Mean held-out AUC (classification) or Pearson r (regression) over k folds."""
    folds = kfold_indices(y, k, seed, stratify=(mode == "classification"))
    scores = []
    for test in folds:
        train = np.setdiff1d(np.arange(len(y)), test)
        if len(test) == 0 or len(train) == 0:
            continue
        if mode == "classification" and (len(np.unique(y[train])) < 2 or len(np.unique(y[test])) < 2):
            continue
        model = fit_fn(X[train], y[train])
        pred = predict(model, X[test])
        try:
            scores.append(auc(pred, y[test]) if mode == "classification" else pearson(pred, y[test]))
        except DataError:
            scores.append(0.5 if mode == "classification" else 0.0)
    if not scores:
        raise DataError("no usable cross-validation folds")
    return float(np.mean(scores))


def select_lasso_lambda(X, y, mode, cfg):
    """Pick lam from ``cfg.lam_grid`` by k-fold CV; ties go to the larger lam.

    Each fold walks the grid from large to small lam, warm-starting every
    solve from the previous solution.
    """
    grid = sorted(cfg.lam_grid, reverse=True)
    folds = kfold_indices(y, cfg.cv_folds, cfg.seed, stratify=(mode == "classification"))
    per_lam = [[] for _ in grid]
    for test in folds:
        train = np.setdiff1d(np.arange(len(y)), test)
        Xt, yt = X[train], y[train]
        if len(test) == 0 or (mode == "classification" and (len(np.unique(yt)) < 2 or len(np.unique(y[test])) < 2)):
            continue
        warm = None
        for i, lam in enumerate(grid):
            warm = _lasso_solve(Xt, yt, mode, lam, cfg.lasso_max_iter, cfg.lasso_tol, warm)
            model = ModelWeights("lasso", mode, warm[0], warm[1])
            pred = predict(model, X[test])
            try:
                s = auc(pred, y[test]) if mode == "classification" else pearson(pred, y[test])
            except DataError:
                s = 0.5 if mode == "classification" else 0.0
            per_lam[i].append(s)
    if not per_lam[0]:
        raise DataError("no usable cross-validation folds for choosing lam")
    means = [float(np.mean(v)) for v in per_lam]
    return grid[int(np.argmax(means))]


# --- max margin ----------------------------------------------------------------

def fit_max_margin(X, y, mode="classification", cfg=None):
    cfg = cfg or TrainConfig()
    _check_mode(mode)
    X, y = _check_xy(X, y)
    n, p = X.shape
    reg = 1.0 / (cfg.C * n)  # |b|^2/(2C) on the summed loss == reg/2 |b|^2 on the mean
    if mode == "classification":
        _check_labels(y)
        s = 2.0 * y - 1.0
        b0 = 0.0
    else:
        b0 = float(np.median(y))
    beta = np.zeros(p)
    avg_b, avg_b0, n_avg = np.zeros(p), 0.0, 0
    start_avg = cfg.svm_iters // 2
    for t in range(1, cfg.svm_iters + 1):
        z = X @ beta + b0
        if mode == "classification":
            active = s * z < 1.0
            w = -s * active / n
        else:
            r = z - y
            w = np.sign(r) * (np.abs(r) > cfg.epsilon) / n
        gb = X.T @ w + reg * beta
        g0 = float(w.sum())
        eta = cfg.svm_step / math.sqrt(t)
        beta = beta - eta * gb
        b0 -= eta * g0
        if t > start_avg:
            n_avg += 1
            avg_b += (beta - avg_b) / n_avg
            avg_b0 += (b0 - avg_b0) / n_avg
    if not (np.all(np.isfinite(avg_b)) and math.isfinite(avg_b0)):
        raise NumericalError("max-margin weights diverged")
    return ModelWeights("max_margin", mode, avg_b, avg_b0,
                        hyperparams={"C": cfg.C, "epsilon": cfg.epsilon}, seed=cfg.seed)


# --- LDA -------------------------------------------------------------------------

def fit_lda(X, y, mode="classification", cfg=None):
    cfg = cfg or TrainConfig()
    _check_mode(mode)
    X, y = _check_xy(X, y)
    if mode == "regression":
        A = np.column_stack([X, np.ones(len(y))])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        return ModelWeights("lda", mode, sol[:-1], float(sol[-1]), seed=cfg.seed)
    _check_labels(y)
    if len(np.unique(y)) < 2:
        raise DataError("LDA needs both classes present")
    X0, X1 = X[y == 0], X[y == 1]
    mu0, mu1 = X0.mean(axis=0), X1.mean(axis=0)
    diff = mu1 - mu0
    if not np.any(diff):
        raise DataError("LDA is degenerate: class means are identical")
    S = ((X0 - mu0).T @ (X0 - mu0) + (X1 - mu1).T @ (X1 - mu1)) / len(y)
    S[np.diag_indices_from(S)] += LDA_RIDGE
    try:
        w = np.linalg.solve(S, diff)
    except np.linalg.LinAlgError as e:
        raise DataError(f"LDA covariance is singular: {e}") from None
    if not np.all(np.isfinite(w)):
        raise NumericalError("LDA direction is not finite")
    b0 = -float(w @ (mu0 + mu1)) / 2.0
    return ModelWeights("lda", mode, w, b0, hyperparams={"ridge": LDA_RIDGE}, seed=cfg.seed)


# --- neural network ---------------------------------------------------------

def init_network(n_in, hidden, seed, out_bias=0.0):
    rng = np.random.default_rng(seed)
    sizes = [n_in, hidden, hidden, 1]
    layers = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, math.sqrt(2.0 / a), size=(a, b))
        layers.append((W, np.zeros(b)))
    layers[-1] = (layers[-1][0], np.full(1, out_bias))
    return layers


def _forward(layers, X, mode):
    acts = [X]
    pre = []
    h = X
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        pre.append(z)
        if i < len(layers) - 1 or mode == "regression":
            h = np.maximum(z, 0.0)
        else:
            h = sigmoid(z)
        acts.append(h)
    return pre, acts


def network_loss_and_grads(layers, X, y, mode):
    """Mean loss and its gradient for every (W, b)."""
    n = len(y)
    pre, acts = _forward(layers, X, mode)
    out = acts[-1][:, 0]
    if mode == "classification":
        z = pre[-1][:, 0]
        # cross-entropy on logits: log(1 + e^z) - y z
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        delta = ((out - y) / n)[:, None]
    else:
        r = out - y
        loss = 0.5 * float(np.mean(r * r))
        delta = ((r / n) * (pre[-1][:, 0] > 0))[:, None]
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (pre[i - 1] > 0)
    return loss, grads


def fit_neural_net(X, y, mode="classification", cfg=None, return_history=False):
    cfg = cfg or TrainConfig()
    _check_mode(mode)
    X, y = _check_xy(X, y)
    if mode == "classification":
        _check_labels(y)
        out_bias = 0.0
    else:
        out_bias = float(y.mean())
    layers = init_network(X.shape[1], cfg.nn_hidden, cfg.seed, out_bias)
    vel = [(np.zeros_like(W), np.zeros_like(b)) for W, b in layers]
    history = []
    for epoch in range(cfg.nn_epochs):
        loss, grads = network_loss_and_grads(layers, X, y, mode)
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite network loss at epoch {epoch}")
        history.append(loss)
        new_layers, new_vel = [], []
        for (W, b), (gW, gb), (vW, vb) in zip(layers, grads, vel):
            vW = cfg.nn_momentum * vW - cfg.nn_lr * gW
            vb = cfg.nn_momentum * vb - cfg.nn_lr * gb
            new_layers.append((W + vW, b + vb))
            new_vel.append((vW, vb))
        layers, vel = new_layers, new_vel
    model = ModelWeights("neural_net", mode, None, 0.0, layers,
                         hyperparams={"hidden": cfg.nn_hidden, "lr": cfg.nn_lr,
                                      "momentum": cfg.nn_momentum, "epochs": cfg.nn_epochs},
                         seed=cfg.seed)
    return (model, history) if return_history else model


# --- dispatch ------------------------------------------------------------------

FITTERS = {
    "lasso": fit_lasso,
    "max_margin": fit_max_margin,
    "lda": fit_lda,
    "neural_net": fit_neural_net,
}


def fit_model(kind, X, y, mode="classification", cfg=None):
    if kind not in FITTERS:
        raise DataError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")
    return FITTERS[kind](X, y, mode, cfg)


def predict(model, X):
    """Real-valued scores; for classifiers, larger means more likely meaningful."""
    X = np.asarray(X, float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got shape {X.shape}")
    if model.kind == "neural_net":
        return _forward(model.layers, X, model.mode)[1][-1][:, 0]
    z = X @ model.coef + model.intercept
    if model.kind == "lasso" and model.mode == "classification":
        return sigmoid(z)
    return z


# --- feature selection -----------------------------------------------------------

def lda_cv_auc(X, y, seed, k=5):
    """Default scorer for backward elimination: k-fold CV AUC of LDA."""
    def fit_fn(a, b):
        return fit_lda(a, b)

    try:
        return cv_score(fit_fn, X, y, "classification", k, seed)
    except DataError:
        return 0.5


def backward_eliminate(X, y, target_count=23, scorer=None, seed=0):
    """Greedy backward elimination of columns.

    Repeatedly drops the column whose removal gives the best
    ``scorer(X_subset, y, seed)`` (ties drop the lowest index) until
    ``target_count`` columns remain.  Returns the kept column indices.
    """
    X = np.asarray(X, float)
    if not 0 < target_count < X.shape[1]:
        raise DataError(f"target_count {target_count} must be below the {X.shape[1]} available columns")
    scorer = scorer or lda_cv_auc
    keep = list(range(X.shape[1]))
    while len(keep) > target_count:
        best, drop = -np.inf, None
        for j in keep:
            cols = [c for c in keep if c != j]
            s = scorer(X[:, cols], y, seed)
            if s > best:
                best, drop = s, j
        keep.remove(drop)
    return keep
