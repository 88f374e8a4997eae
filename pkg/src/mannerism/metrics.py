"""Scoring primitives: label binarization, ROC/AUC, correlation, Welch's
t-test and per-category weight shares."""

import math

import numpy as np

from .errors import DataError

MEANINGFUL = 1
MANNERISM = 0
NONZERO_WEIGHT = 1e-10


def binarize(rating):
    """Ratings 4..7 are meaningful (1); 1..3 are mannerisms (0)."""
    if int(rating) != rating or not 1 <= rating <= 7:
        raise DataError(f"rating must be an integer in 1..7, got {rating}")
    return MEANINGFUL if rating >= 4 else MANNERISM


def _check_binary(scores, labels):
    s = np.asarray(scores, float).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise DataError("scores and labels differ in length")
    if not np.all(np.isin(y, (0, 1))):
        raise DataError("labels must be 0/1")
    y = y.astype(int)
    if y.min(initial=1) == y.max(initial=0):
        raise DataError("ROC/AUC needs both classes")
    return s, y


def roc_curve(scores, labels):
    """ROC points ``(fpr, tpr)`` at every distinct threshold, from (0,0) to (1,1).

    Tied scores move the curve in a single diagonal step.
    """
    s, y = _check_binary(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.r_[0, np.cumsum(y)[last]]
    fp = np.r_[0, np.cumsum(1 - y)[last]]
    return fp / fp[-1], tp / tp[-1]


def _average_ranks(x):
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels):
    """Mann-Whitney AUC: fraction of (positive, negative) pairs ordered
    correctly, ties counting one half."""
    s, y = _check_binary(scores, labels)
    ranks = _average_ranks(s)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pearson(pred, actual):
    a = np.asarray(pred, float).ravel()
    b = np.asarray(actual, float).ravel()
    if a.shape != b.shape or len(a) < 2:
        raise DataError("pearson needs two equal-length inputs of length >= 2")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DataError("pearson is undefined for a constant input")
    a = a - a.mean()
    b = b - b.mean()
    r = float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))
    return max(-1.0, min(1.0, r))


# --- Student t distribution ----------------------------------------------------

def _betacf(a, b, x, max_iter=500, eps=3e-16):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t, dof):
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc(0.5 * dof, 0.5, dof / (dof + t * t))


def welch_ttest(a, b):
    """Welch's unequal-variance t-test.

    Returns ``(t, p, dof)`` with a two-sided p-value and Welch-Satterthwaite
    degrees of freedom.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if len(a) < 2 or len(b) < 2:
        raise DataError("welch_ttest needs at least 2 values per group")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    if va == 0 and vb == 0:
        raise DataError("welch_ttest undefined: both groups have zero variance")
    se2 = va + vb
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    dof = se2 ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return t, t_two_sided_p(t, dof), float(dof)


# --- weight distribution ---------------------------------------------------------

def category_weights(coef, categories, order=None):
    """Percentage share of each feature category in a linear model.

    A category's weight is the mean absolute coefficient over its nonzero
    coefficients (0 if it has none); shares are normalized to sum to 100.
    """
    coef = np.asarray(coef, float).ravel()
    categories = list(categories)
    if len(coef) != len(categories):
        raise DataError("coefficient and category lists differ in length")
    if order is None:
        order = list(dict.fromkeys(categories))
    cats = np.array(categories)
    w = {}
    for c in order:
        v = np.abs(coef[cats == c])
        nz = v[v > NONZERO_WEIGHT]
        w[c] = float(nz.mean()) if len(nz) else 0.0
    total = sum(w.values())
    if total == 0:
        raise DataError("all coefficients are zero; category weights undefined")
    return {c: 100.0 * v / total for c, v in w.items()}
