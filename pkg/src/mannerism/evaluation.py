"""Evaluation protocol: repeated random splits, subsampling, significance
tests and category weight shares, assembled into an :class:`EvalReport`.

Each repeat draws its own generator from ``(seed, repeat index, stream)``
so serial and threaded runs give identical results.
"""

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .features import CATEGORIES, fit_zscore
from .metrics import auc, binarize, category_weights, pearson, roc_curve, welch_ttest
from .models import KINDS, LINEAR_KINDS, TrainConfig, fit_model, predict

log = logging.getLogger(__name__)

MAX_SPLIT_ATTEMPTS = 100
ROC_GRID = np.linspace(0.0, 1.0, 101)
SOURCES = ("crowd_average", "self")


@dataclass(frozen=True)
class SplitSpec:
    n_repeats: int = 30
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise DataError("test_fraction must be in (0, 1)")
        if self.n_repeats < 1:
            raise DataError("n_repeats must be >= 1")


def derive_seed(*parts):
    """Stable 31-bit seed from any sequence of labels."""
    h = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:4], "little") & 0x7FFFFFFF


def repeat_rng(seed, repeat, stream):
    return np.random.default_rng([seed, repeat, stream])


def random_split(n, test_fraction, rng, labels=None):
    """Random train/test index split; redrawn until both sides hold both classes."""
    n_test = min(n - 2, max(1, int(round(test_fraction * n))))
    if n_test < 1:
        raise DataError(f"{n} rows are too few to split")
    for _ in range(MAX_SPLIT_ATTEMPTS):
        perm = rng.permutation(n)
        test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        if labels is None:
            return train, test
        if len(np.unique(labels[test])) == 2 and len(np.unique(labels[train])) == 2:
            return train, test
    raise DataError(f"no split with both classes in train and test after {MAX_SPLIT_ATTEMPTS} attempts")


def _metric(pred, y, mode):
    if mode == "classification":
        return auc(pred, y)
    try:
        return pearson(pred, y)
    except DataError:
        # constant predictions carry no linear association
        return 0.0


def evaluate_split(X, y, train, test, kind, mode, cfg):
    """Fit z-score + model on ``train``, score on ``test``.  Returns (metric, scores)."""
    z = fit_zscore(X[train])
    Xtr = z.apply_array(X[train])
    Xte = z.apply_array(X[test])
    model = fit_model(kind, Xtr, y[train], mode, cfg)
    pred = predict(model, Xte)
    return _metric(pred, y[test], mode), pred


def mean_roc(curves):
    """Vertical average of ROC curves on a fixed FPR grid."""
    tprs = []
    for fpr, tpr in curves:
        # right-continuous interpolation so vertical jumps take their upper value
        tprs.append(np.interp(ROC_GRID, fpr, tpr, right=1.0))
    t = np.mean(tprs, axis=0)
    t[0] = 0.0
    return ROC_GRID.copy(), t


@dataclass
class SplitResult:
    values: list
    rows: list = field(default_factory=list)  # row indices used in each repeat
    roc: tuple = None

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std_error(self):
        return float(np.std(self.values, ddof=1) / math.sqrt(len(self.values))) if len(self.values) > 1 else 0.0


def _run(fn, n, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def _check_dataset(X, y, mode):
    X = np.asarray(X, float)
    y = np.asarray(y, float).ravel()
    if X.shape[0] != len(y):
        raise DataError("feature rows and targets differ in count")
    if mode == "classification" and len(np.unique(y)) < 2:
        raise DataError("classification dataset needs both classes")
    return X, y


def repeated_splits(X, y, kind, mode, spec=None, cfg=None, jobs=1):
    """Metric (AUC or Pearson r) on ``spec.n_repeats`` seeded random splits."""
    spec = spec or SplitSpec()
    return subsample_experiment(X, y, kind, mode, 1.0, spec, cfg, jobs)


def subsample_experiment(X, y, kind, mode, fraction=1 / 3, spec=None, cfg=None, jobs=1):
    """Like :func:`repeated_splits`, but each repeat first keeps a seeded
    random subset of ``ceil(fraction * N)`` rows."""
    spec = spec or SplitSpec()
    cfg = cfg or TrainConfig()
    if not 0 < fraction <= 1:
        raise DataError("fraction must be in (0, 1]")
    if kind not in KINDS:
        raise DataError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}")
    X, y = _check_dataset(X, y, mode)
    n = len(y)
    k = math.ceil(fraction * n)

    def work(i):
        last = None
        for attempt in range(MAX_SPLIT_ATTEMPTS):
            if k == n:
                rows = np.arange(n)
            else:
                rows = np.sort(repeat_rng(spec.seed, i, 1 + attempt).choice(n, k, replace=False))
            if mode == "classification" and len(np.unique(y[rows])) < 2:
                continue
            try:
                value, curve = _one_repeat(X, y, rows, kind, mode, cfg, spec, i)
                return value, curve, rows
            except DataError as e:
                last = e
                if k == n:
                    break
        raise DataError(f"repeat {i}: could not form a usable subsample/split ({last})")

    out = _run(work, spec.n_repeats, jobs)
    values = [float(v) for v, _, _ in out]
    roc = mean_roc([c for _, c, _ in out]) if mode == "classification" else None
    return SplitResult(values, [r for _, _, r in out], roc)


def _one_repeat(X, y, rows, kind, mode, cfg, spec, i):
    Xs, ys = X[rows], y[rows]
    rng = repeat_rng(spec.seed, i, 0)
    train, test = random_split(len(rows), spec.test_fraction, rng,
                               ys if mode == "classification" else None)
    model_cfg = cfg.replace(seed=derive_seed(spec.seed, i, "model"))
    value, pred = evaluate_split(Xs, ys, train, test, kind, mode, model_cfg)
    curve = roc_curve(pred, ys[test]) if mode == "classification" else None
    return value, curve


def fit_full(X, y, kind, mode, cfg):
    """Z-score on all rows, then fit.  Returns ``(model, zscore_params)``."""
    z = fit_zscore(X)
    return fit_model(kind, z.apply_array(X), y, mode, cfg), z


# --- dataset assembly ------------------------------------------------------------

def join_annotations(matrix, annotations, source):
    """Rows of ``matrix`` joined with ratings from ``source`` (or ``"all"``).

    Returns ``(row_indices, ratings)``; a pattern rated by several records of
    the chosen source contributes one row per record.
    """
    if source not in (*SOURCES, "all"):
        raise DataError(f"unknown annotation source {source!r}")
    index = {key: i for i, key in enumerate(matrix.keys)}
    rows, ratings = [], []
    for rec in annotations:
        if source != "all" and rec.source != source:
            continue
        i = index.get((rec.video_id, rec.pattern_id))
        if i is not None:
            rows.append(i)
            ratings.append(rec.rating)
    if not rows:
        raise DataError(f"no feature rows match annotations with source {source!r}")
    return np.array(rows, int), np.array(ratings, float)


def targets(ratings, mode):
    if mode == "classification":
        return np.array([binarize(int(r)) for r in ratings], float)
    return np.asarray(ratings, float)


# --- report ------------------------------------------------------------------

@dataclass
class EvalReport:
    """All results of :func:`run_evaluation`, keyed by mode -> kind -> set.

    ``metrics[mode][kind][set]`` holds the per-repeat values, where ``set`` is
    ``crowd``, ``crowd_subsampled`` or ``self``.
    """

    metrics: dict = field(default_factory=dict)
    roc: dict = field(default_factory=dict)  # kind -> set -> (fpr, tpr)
    ttests: dict = field(default_factory=dict)  # mode -> kind -> {t, p, dof}
    weights: dict = field(default_factory=dict)  # mode -> kind -> set -> category -> percent
    config: dict = field(default_factory=dict)

    def mean(self, mode, kind, which):
        return float(np.mean(self.metrics[mode][kind][which]))

    def to_json(self):
        return {
            "config": self.config,
            "metrics": {
                mode: {
                    kind: {
                        s: {"values": [float(v) for v in vals], "mean": float(np.mean(vals))}
                        for s, vals in sets.items()
                    }
                    for kind, sets in kinds.items()
                }
                for mode, kinds in self.metrics.items()
            },
            "roc": {
                kind: {s: {"fpr": [float(v) for v in f], "tpr": [float(v) for v in t]} for s, (f, t) in sets.items()}
                for kind, sets in self.roc.items()
            },
            "ttests": self.ttests,
            "weights": self.weights,
        }

    @classmethod
    def from_json(cls, d):
        metrics = {
            mode: {kind: {s: v["values"] for s, v in sets.items()} for kind, sets in kinds.items()}
            for mode, kinds in d["metrics"].items()
        }
        roc = {
            kind: {s: (np.array(v["fpr"]), np.array(v["tpr"])) for s, v in sets.items()}
            for kind, sets in d.get("roc", {}).items()
        }
        return cls(metrics, roc, d.get("ttests", {}), d.get("weights", {}), d.get("config", {}))

    def roc_rows(self):
        for kind, sets in self.roc.items():
            for s, (fpr, tpr) in sets.items():
                for f, t in zip(fpr, tpr):
                    yield kind, s, f, t

    def weight_rows(self):
        for mode, kinds in self.weights.items():
            for kind, sets in kinds.items():
                for s, cats in sets.items():
                    for c, pct in (cats or {}).items():
                        yield kind, mode, s, c, pct


def _category_order(categories):
    extra = [c for c in dict.fromkeys(categories) if c not in CATEGORIES]
    return [c for c in CATEGORIES if c in categories] + extra


def run_evaluation(matrix, annotations, kinds=KINDS, modes=("classification", "regression"),
                   spec=None, cfg=None, subsample_fraction=1 / 3, jobs=1):
    """The full protocol for both annotation sources.

    For every mode and model kind: repeated splits on crowd and on self
    annotations, the subsampled-crowd experiment, a Welch t-test between
    self and subsampled-crowd metrics, and (linear kinds) category weight
    shares of models fit on all rows of each source.
    """
    spec = spec or SplitSpec()
    cfg = cfg or TrainConfig()
    order = _category_order(matrix.categories)
    report = EvalReport(config={
        "n_repeats": spec.n_repeats, "test_fraction": spec.test_fraction, "seed": spec.seed,
        "subsample_fraction": subsample_fraction, "kinds": list(kinds), "modes": list(modes),
    })
    data = {s: join_annotations(matrix, annotations, s) for s in SOURCES}
    for mode in modes:
        report.metrics[mode] = {}
        report.ttests[mode] = {}
        report.weights[mode] = {}
        for kind in kinds:
            res = {}
            for source, name in (("crowd_average", "crowd"), ("self", "self")):
                rows, ratings = data[source]
                X, y = matrix.values[rows], targets(ratings, mode)
                sub_spec = SplitSpec(spec.n_repeats, spec.test_fraction, derive_seed(spec.seed, source, mode))
                res[name] = repeated_splits(X, y, kind, mode, sub_spec, cfg, jobs)
                if source == "crowd_average":
                    sub_spec = SplitSpec(spec.n_repeats, spec.test_fraction,
                                         derive_seed(spec.seed, source, mode, "subsample"))
                    res["crowd_subsampled"] = subsample_experiment(
                        X, y, kind, mode, subsample_fraction, sub_spec, cfg, jobs)
                if kind in LINEAR_KINDS:
                    model, _ = fit_full(X, y, kind, mode, cfg.replace(seed=derive_seed(spec.seed, source, mode, kind)))
                    report.weights[mode].setdefault(kind, {})[name] = _weights_or_none(model.coef, matrix.categories, order)
            report.metrics[mode][kind] = {k: r.values for k, r in res.items()}
            if mode == "classification":
                report.roc[kind] = {k: r.roc for k, r in res.items()}
            try:
                t, p, dof = welch_ttest(res["self"].values, res["crowd_subsampled"].values)
                report.ttests[mode][kind] = {"t": t, "p": p, "dof": dof}
            except DataError as e:
                report.ttests[mode][kind] = {"error": str(e)}
            log.info("%s/%s: crowd %.3f, crowd_subsampled %.3f, self %.3f", mode, kind,
                     res["crowd"].mean, res["crowd_subsampled"].mean, res["self"].mean)
    return report


def _weights_or_none(coef, categories, order):
    # an all-zero model has no defined shares
    try:
        return category_weights(coef, categories, order)
    except DataError:
        return None
