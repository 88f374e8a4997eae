"""Shift-invariant sparse coding of multichannel signals.

A signal ``f`` (N x C) is modelled as a sum of D short patterns (M x C) each
convolved with a nonnegative sparse activation train (length N)::

    f_model[n] = sum_d (alpha_d * psi_d)[n]

and the pair is learned by minimizing::

    0.5 * ||f - f_model||^2 + lam * ||alpha||_1
    s.t. ||psi_d||_F <= 1 for every d, alpha >= 0

with alternating projected / proximal gradient steps.  Step sizes come from a
backtracking line search (start at 1, halve, Armijo constant 1e-4) so the
objective never increases.

Activations are only allowed at start indices ``0 .. N - M``; later entries
are held at zero so that every pattern occurrence fits inside the signal.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .errors import DataError, NumericalError
from .signal import MultichannelSignal

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 2.0 ** -60


@dataclass(frozen=True, eq=False)
class PatternDictionary:
    """D patterns of M samples by C channels."""

    patterns: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        p = np.array(self.patterns, dtype=float)
        if p.ndim != 3:
            raise DataError(f"patterns must be D x M x C, got shape {p.shape}")
        object.__setattr__(self, "patterns", p)

    @property
    def n_patterns(self):
        return self.patterns.shape[0]

    @property
    def length(self):
        return self.patterns.shape[1]

    @property
    def n_channels(self):
        return self.patterns.shape[2]

    def norms(self):
        return np.sqrt(np.sum(self.patterns ** 2, axis=(1, 2)))


@dataclass(frozen=True, eq=False)
class ActivationSet:
    """D activation trains of length N."""

    trains: np.ndarray

    def __post_init__(self):
        a = np.array(self.trains, dtype=float)
        if a.ndim == 1:
            a = a[None, :]
        if a.ndim != 2:
            raise DataError(f"trains must be D x N, got shape {a.shape}")
        object.__setattr__(self, "trains", a)

    @property
    def n_patterns(self):
        return self.trains.shape[0]

    @property
    def length(self):
        return self.trains.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    n_patterns: int = 5
    pattern_seconds: float = 2.0
    max_iters: int = 500
    rel_tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise DataError("lam must be positive")
        if self.n_patterns < 1:
            raise DataError("n_patterns must be >= 1")
        if not self.pattern_seconds > 0 or self.max_iters < 1 or not self.rel_tol > 0:
            raise DataError("pattern_seconds, max_iters and rel_tol must be positive")

    def pattern_length(self, sample_rate_hz):
        m = int(round(self.pattern_seconds * sample_rate_hz))
        if m < 2:
            raise DataError(
                f"pattern length {self.pattern_seconds}s at {sample_rate_hz} Hz is under 2 samples"
            )
        return m


@dataclass(frozen=True)
class PatternOccurrence:
    pattern_id: int
    start_index: int
    start_s: float
    amplitude: float


@dataclass
class SolveTrace:
    objective: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_objective(self):
        return self.objective[-1]


# --- array kernels ----------------------------------------------------------

def _fft_len(n, m):
    return sfft.next_fast_len(n + m - 1, real=True)


def _model(psi, alpha, n):
    """Truncated linear convolution sum over patterns -> N x C."""
    L = _fft_len(n, psi.shape[1])
    A = sfft.rfft(alpha, L, axis=1)
    P = sfft.rfft(psi, L, axis=1)
    return sfft.irfft(np.einsum("df,dfc->fc", A, P), L, axis=0)[:n]


def _grad_psi(resid, alpha, m):
    """d/dpsi of 0.5||resid||^2: minus the cross-correlation of resid with alpha."""
    n = resid.shape[0]
    L = _fft_len(n, m)
    R = sfft.rfft(resid, L, axis=0)
    A = sfft.rfft(alpha, L, axis=1)
    corr = sfft.irfft(np.conj(A)[:, :, None] * R[None], L, axis=1)
    return -corr[:, :m]


def _grad_alpha(resid, psi):
    """d/dalpha of 0.5||resid||^2: minus the cross-correlation of resid with psi."""
    n = resid.shape[0]
    L = _fft_len(n, psi.shape[1])
    R = sfft.rfft(resid, L, axis=0)
    P = sfft.rfft(psi, L, axis=1)
    corr = sfft.irfft(np.einsum("dfc,fc->df", np.conj(P), R), L, axis=1)
    return -corr[:, :n]


def _project_psi(psi):
    norms = np.sqrt(np.sum(psi ** 2, axis=(1, 2)))
    return psi / np.maximum(1.0, norms)[:, None, None]


def _shrink(alpha, thresh):
    return np.sign(alpha) * np.maximum(0.0, np.abs(alpha) - thresh)


# --- public operations ------------------------------------------------------

def _check_dims(dictionary, acts, n=None, f=None):
    if dictionary.n_patterns != acts.n_patterns:
        raise DataError(f"{dictionary.n_patterns} patterns but {acts.n_patterns} activation trains")
    if n is not None and acts.length != n:
        raise DataError(f"activation length {acts.length} != signal length {n}")
    if f is not None and f.n_channels != dictionary.n_channels:
        raise DataError(f"signal has {f.n_channels} channels, patterns have {dictionary.n_channels}")


def reconstruct(dictionary, acts, n):
    """Model signal ``sum_d alpha_d * psi_d`` truncated to ``n`` samples."""
    _check_dims(dictionary, acts, n)
    out = _model(dictionary.patterns, acts.trains, n)
    return MultichannelSignal(out, dictionary.sample_rate_hz)


def objective(f, dictionary, acts, lam):
    _check_dims(dictionary, acts, f.n_samples, f)
    resid = f.samples - _model(dictionary.patterns, acts.trains, f.n_samples)
    return 0.5 * float(np.sum(resid ** 2)) + lam * float(np.sum(np.abs(acts.trains)))


def grad_psi(f, dictionary, acts):
    _check_dims(dictionary, acts, f.n_samples, f)
    resid = f.samples - _model(dictionary.patterns, acts.trains, f.n_samples)
    return _grad_psi(resid, acts.trains, dictionary.length)


def grad_alpha(f, dictionary, acts):
    _check_dims(dictionary, acts, f.n_samples, f)
    resid = f.samples - _model(dictionary.patterns, acts.trains, f.n_samples)
    return _grad_alpha(resid, dictionary.patterns)


def shrink(acts, threshold):
    """Soft-threshold every activation by ``threshold`` (signed, before projection)."""
    if threshold < 0:
        raise DataError("shrink threshold must be nonnegative")
    return ActivationSet(_shrink(acts.trains, threshold))


def project_dictionary(dictionary):
    return PatternDictionary(_project_psi(dictionary.patterns), dictionary.sample_rate_hz)


def project_activations(acts):
    return ActivationSet(np.maximum(acts.trains, 0.0))


def fit(f, cfg):
    """Learn patterns and activations for one signal.

    Returns ``(PatternDictionary, ActivationSet, SolveTrace)``.  Each outer
    iteration takes one projected gradient step on the patterns followed by
    one proximal (shrink + nonnegativity) step on the activations.
    Iteration stops once an alternation lowers the objective by less than
    ``rel_tol`` relative, or after ``max_iters``.
    """
    x = f.samples
    n, c = x.shape
    m = cfg.pattern_length(f.sample_rate_hz)
    if n <= m:
        raise DataError(f"signal has {n} samples, needs more than the pattern length {m}")
    d = cfg.n_patterns
    lam = cfg.lam
    n_valid = n - m + 1

    rng = np.random.default_rng(cfg.seed)
    psi = _project_psi(rng.uniform(-0.5, 0.5, size=(d, m, c)))
    alpha = np.zeros((d, n))

    resid = x - _model(psi, alpha, n)
    smooth = 0.5 * float(np.sum(resid ** 2))
    obj = smooth
    trace = SolveTrace(objective=[obj])

    for it in range(1, cfg.max_iters + 1):
        prev = obj

        # pattern step: projected gradient, Armijo along the projection arc
        g = _grad_psi(resid, alpha, m)
        step = 1.0
        while step >= MIN_STEP:
            cand = _project_psi(psi - step * g)
            r_c = x - _model(cand, alpha, n)
            s_c = 0.5 * float(np.sum(r_c ** 2))
            if s_c <= smooth + ARMIJO_C * float(np.sum(g * (cand - psi))):
                psi, resid, smooth = cand, r_c, s_c
                break
            step *= 0.5

        # activation step: gradient, shrink, project; Armijo on the full objective
        g = _grad_alpha(resid, psi)
        g[:, n_valid:] = 0.0
        l1 = float(np.sum(alpha))
        step = 1.0
        while step >= MIN_STEP:
            cand = np.maximum(_shrink(alpha - step * g, step * lam), 0.0)
            cand[:, n_valid:] = 0.0
            r_c = x - _model(psi, cand, n)
            s_c = 0.5 * float(np.sum(r_c ** 2))
            l1_c = float(np.sum(cand))
            decrease = float(np.sum(g * (cand - alpha))) + lam * (l1_c - l1)
            if s_c + lam * l1_c <= smooth + lam * l1 + ARMIJO_C * decrease:
                alpha, resid, smooth, l1 = cand, r_c, s_c, l1_c
                break
            step *= 0.5

        obj = smooth + lam * l1
        if not math.isfinite(obj):
            raise NumericalError(f"non-finite objective at iteration {it}")
        trace.objective.append(obj)
        trace.iterations = it
        if prev - obj <= cfg.rel_tol * prev:
            trace.converged = True
            break

    log.debug("sisc fit: %d iterations, objective %.6g, converged=%s", trace.iterations, obj, trace.converged)
    return PatternDictionary(psi, f.sample_rate_hz), ActivationSet(alpha), trace


def active_patterns(acts):
    """Indices of patterns whose activation train is not identically zero."""
    return [i for i in range(acts.n_patterns) if np.any(acts.trains[i] > 0)]


def extract_occurrences(acts, pattern_length, sample_rate_hz, min_amplitude_frac=0.1):
    """Turn activation peaks into discrete pattern occurrences.

    A peak is a local maximum of ``alpha_d`` above ``min_amplitude_frac`` times
    the train's global maximum.  Peaks closer than ``pattern_length / 2``
    samples are merged, keeping the larger one.  Each occurrence stands for
    the window ``[start_s, start_s + pattern_length / sample_rate_hz)``.
    """
    if not 0 < min_amplitude_frac <= 1:
        raise DataError("min_amplitude_frac must be in (0, 1]")
    out = []
    for d, a in enumerate(acts.trains):
        top = a.max(initial=0.0)
        if top <= 0:
            continue
        left = np.concatenate([[-np.inf], a[:-1]])
        right = np.concatenate([a[1:], [-np.inf]])
        cand = np.flatnonzero((a >= left) & (a >= right) & (a > 0) & (a >= min_amplitude_frac * top))
        # greedy suppression, largest first; stable sort keeps lower index on ties
        order = cand[np.argsort(-a[cand], kind="stable")]
        kept = []
        for i in order:
            if all(abs(i - k) >= pattern_length / 2 for k in kept):
                kept.append(i)
        for i in sorted(kept):
            out.append(PatternOccurrence(d, int(i), i / sample_rate_hz, float(a[i])))
    return out
