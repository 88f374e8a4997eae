import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mannerism.errors import DataError
from mannerism.signal import MultichannelSignal
from mannerism.sisc import (
    ActivationSet, PatternDictionary, SolverConfig, active_patterns, extract_occurrences, fit,
    grad_alpha, grad_psi, objective, project_activations, project_dictionary, reconstruct, shrink,
)
from mannerism.synth import make_sisc_fixture, match_patterns, shift_ncc


def direct_model(psi, alpha, n):
    """Time-domain oracle: plain np.convolve per pattern and channel."""
    d, m, c = psi.shape
    out = np.zeros((n, c))
    for k in range(d):
        for ch in range(c):
            out[:, ch] += np.convolve(alpha[k], psi[k, :, ch])[:n]
    return out


def random_instance(rng, n=20, c=2, d=2, m=3):
    psi = rng.normal(size=(d, m, c))
    alpha = np.abs(rng.normal(size=(d, n))) * (rng.uniform(size=(d, n)) < 0.4)
    f = rng.normal(size=(n, c))
    return MultichannelSignal(f, 10.0), PatternDictionary(psi, 10.0), ActivationSet(alpha)


def fd_grad(fun, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# --- reconstruct / objective ----------------------------------------------------------

def test_reconstruct_unit_impulse():
    psi = np.array([[[1.0], [2.0]]])
    alpha = np.zeros((1, 6))
    alpha[0, 3] = 1.0
    out = reconstruct(PatternDictionary(psi, 1.0), ActivationSet(alpha), 6).samples[:, 0]
    np.testing.assert_allclose(out, [0, 0, 0, 1, 2, 0], atol=1e-12)


def test_reconstruct_zero_and_scaled_impulse():
    psi = PatternDictionary(np.array([[[1.0], [2.0]]]), 1.0)
    assert np.all(reconstruct(psi, ActivationSet(np.zeros((1, 5))), 5).samples == 0)
    alpha = np.zeros((1, 5))
    alpha[0, 0] = 2.0
    np.testing.assert_allclose(reconstruct(psi, ActivationSet(alpha), 5).samples[:, 0], [2, 4, 0, 0, 0], atol=1e-12)


def test_reconstruct_dimension_mismatch():
    psi = PatternDictionary(np.ones((2, 3, 1)), 1.0)
    with pytest.raises(DataError):
        reconstruct(psi, ActivationSet(np.zeros((1, 5))), 5)
    with pytest.raises(DataError):
        reconstruct(psi, ActivationSet(np.zeros((2, 5))), 6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(4, 30), st.integers(1, 3), st.integers(1, 2), st.integers(1, 4))
def test_reconstruct_matches_direct_convolution_and_is_linear(seed, n, c, d, m):
    rng = np.random.default_rng(seed)
    psi = PatternDictionary(rng.normal(size=(d, m, c)), 1.0)
    a1, a2 = rng.normal(size=(d, n)), rng.normal(size=(d, n))
    r1 = reconstruct(psi, ActivationSet(a1), n).samples
    r2 = reconstruct(psi, ActivationSet(a2), n).samples
    r12 = reconstruct(psi, ActivationSet(a1 + a2), n).samples
    np.testing.assert_allclose(r1, direct_model(psi.patterns, a1, n), atol=1e-10)
    np.testing.assert_allclose(r12, r1 + r2, atol=1e-10)


def test_objective_examples(rng):
    f, psi, acts = random_instance(rng)
    exact = MultichannelSignal(reconstruct(psi, acts, 20).samples, 10.0)
    assert objective(exact, psi, acts, 0.0) == pytest.approx(0.0, abs=1e-20)
    zero = ActivationSet(np.zeros((2, 20)))
    assert objective(MultichannelSignal(np.zeros((20, 2)), 10.0), psi, zero, 3.0) == 0.0
    one = MultichannelSignal(np.array([[1.0]]), 1.0)
    assert objective(one, PatternDictionary(np.ones((1, 1, 1)), 1.0), ActivationSet(np.zeros((1, 1))), 1.0) == 0.5


# --- gradients --------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_grad_psi_finite_differences(seed):
    rng = np.random.default_rng(seed)
    f, psi, acts = random_instance(rng)

    def obj(p):
        return objective(f, PatternDictionary(p, 10.0), acts, 0.0)

    assert rel_err(grad_psi(f, psi, acts), fd_grad(obj, psi.patterns.copy())) <= 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_grad_alpha_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    f, psi, acts = random_instance(rng)

    def obj(a):
        return objective(f, psi, ActivationSet(a), 0.0)

    assert rel_err(grad_alpha(f, psi, acts), fd_grad(obj, acts.trains.copy())) <= 1e-4


def test_gradients_vanish_at_exact_fit_and_scale_with_residual(rng):
    f, psi, acts = random_instance(rng)
    model = reconstruct(psi, acts, 20).samples
    exact = MultichannelSignal(model, 10.0)
    assert np.abs(grad_psi(exact, psi, acts)).max() < 1e-10
    assert np.abs(grad_alpha(exact, psi, acts)).max() < 1e-10
    # residual r -> 2r by moving f to model + 2(f - model)
    doubled = MultichannelSignal(model + 2 * (f.samples - model), 10.0)
    np.testing.assert_allclose(grad_psi(doubled, psi, acts), 2 * grad_psi(f, psi, acts), atol=1e-10)
    np.testing.assert_allclose(grad_alpha(doubled, psi, acts), 2 * grad_alpha(f, psi, acts), atol=1e-10)


def test_grad_alpha_peaks_at_impulse():
    # 5-sample case: psi = [1, 0] (identity-like), f has a single spike at n=2
    psi = PatternDictionary(np.array([[[1.0], [0.0]]]), 1.0)
    alpha = ActivationSet(np.zeros((1, 5)))
    f = MultichannelSignal(np.array([0, 0, 1.0, 0, 0]), 1.0)
    g = grad_alpha(f, psi, alpha)[0]
    # hand result: -(cross-correlation of f with psi) = [0, 0, -1, 0, 0]
    np.testing.assert_allclose(g, [0, 0, -1, 0, 0], atol=1e-12)
    assert np.argmin(g) == 2


# --- shrink & projections -------------------------------------------------------------------

def test_shrink_examples():
    np.testing.assert_allclose(shrink(ActivationSet([0.5, -0.1, 0.3]), 0.2).trains[0], [0.3, 0.0, 0.1])
    x = ActivationSet([0.5, -0.7, 0.0])
    np.testing.assert_array_equal(shrink(x, 0.0).trains, x.trains)
    assert shrink(ActivationSet([0.05]), 0.2).trains[0, 0] == 0.0
    with pytest.raises(DataError):
        shrink(x, -0.1)


def test_shrink_signed_formula():
    out = shrink(ActivationSet([-0.5, 0.5]), 0.2).trains[0]
    np.testing.assert_allclose(out, [-0.3, 0.3])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20), st.floats(0, 5))
def test_shrink_commutes_with_nonnegativity(values, t):
    x = ActivationSet(values)
    a = shrink(project_activations(x), t).trains
    b = project_activations(shrink(x, t)).trains
    np.testing.assert_array_equal(a, b)
    # magnitudes drop by exactly min(|x|, t)
    np.testing.assert_allclose(np.abs(shrink(x, t).trains), np.abs(x.trains) - np.minimum(np.abs(x.trains), t))


def test_project_dictionary_examples():
    p = np.zeros((3, 2, 2))
    p[0] = [[2.0, 0.0], [0.0, 0.0]]  # norm 2
    p[1] = [[0.3, 0.4], [0.0, 0.0]]  # norm 0.5
    out = project_dictionary(PatternDictionary(p, 1.0))
    np.testing.assert_allclose(out.norms(), [1.0, 0.5, 0.0])
    np.testing.assert_allclose(out.patterns[0], p[0] / 2)
    np.testing.assert_array_equal(out.patterns[1], p[1])


def test_project_activations_examples():
    np.testing.assert_array_equal(project_activations(ActivationSet([-1, 0, 2])).trains[0], [0, 0, 2])
    np.testing.assert_array_equal(project_activations(ActivationSet([1, 2])).trains[0], [1, 2])
    np.testing.assert_array_equal(project_activations(ActivationSet([-1, -2])).trains[0], [0, 0])


# --- occurrences --------------------------------------------------------------------------

def test_extract_occurrences_isolated_peaks():
    occ = extract_occurrences(ActivationSet([0, 0, 5, 0, 0, 3, 0]), 2, 10.0, 0.1)
    assert [o.start_index for o in occ] == [2, 5]
    assert occ[0].start_s == pytest.approx(0.2) and occ[0].amplitude == 5.0


def test_extract_occurrences_merge_and_threshold():
    occ = extract_occurrences(ActivationSet([0, 5, 4, 0]), 4, 1.0, 0.1)
    assert [o.start_index for o in occ] == [1]
    occ = extract_occurrences(ActivationSet([0, 5, 0, 0.4, 0]), 1, 1.0, 0.1)
    assert [o.start_index for o in occ] == [1]
    assert len(extract_occurrences(ActivationSet(np.zeros((2, 6))), 2, 1.0)) == 0
    with pytest.raises(DataError):
        extract_occurrences(ActivationSet([1.0]), 1, 1.0, 0.0)


def test_extract_occurrences_keeps_larger_of_close_peaks():
    occ = extract_occurrences(ActivationSet([0, 3, 0, 5, 0, 0, 0, 0]), 6, 1.0, 0.1)
    assert [o.start_index for o in occ] == [3]


# --- fit ------------------------------------------------------------------------------------

def test_solver_config_validation():
    with pytest.raises(DataError):
        SolverConfig(lam=0.0)
    with pytest.raises(DataError):
        SolverConfig(lam=1.0, n_patterns=0)
    with pytest.raises(DataError, match="2 samples"):
        SolverConfig(lam=1.0, pattern_seconds=0.01).pattern_length(30.0)
    assert SolverConfig(lam=1.0).pattern_length(30.0) == 60


def test_fit_rejects_short_signal():
    with pytest.raises(DataError, match="pattern length"):
        fit(MultichannelSignal(np.ones((10, 1)), 10.0), SolverConfig(lam=0.1, pattern_seconds=1.0))


def test_fit_zero_signal():
    f = MultichannelSignal(np.zeros((100, 2)), 10.0)
    d, a, tr = fit(f, SolverConfig(lam=0.1, n_patterns=2, pattern_seconds=0.5, max_iters=20))
    assert np.all(a.trains == 0)
    assert tr.final_objective == 0.0
    assert active_patterns(a) == []


def _small_planted(seed):
    return make_sisc_fixture(seed, n_samples=600, n_channels=3, n_patterns=2, length=10, occurrences=5)


@pytest.mark.parametrize("seed", [0, 1])
def test_fit_trace_monotone_and_feasible(seed):
    f, _, _ = _small_planted(seed)
    cfg = SolverConfig(lam=0.1, n_patterns=2, pattern_seconds=10 / 30, max_iters=150, seed=seed)
    d, a, tr = fit(f, cfg)
    obj = np.array(tr.objective)
    assert np.all(np.isfinite(obj))
    assert np.all(np.diff(obj) <= 0)
    assert np.all(d.norms() <= 1 + 1e-9)
    assert np.all(a.trains >= 0)
    # activations that would run past the end stay zero
    assert np.all(a.trains[:, 600 - 10 + 1:] == 0)


def test_fit_huge_lambda_gives_zero_activations():
    f, _, _ = _small_planted(3)
    lam = float(np.sum(f.samples ** 2))
    _, a, tr = fit(f, SolverConfig(lam=lam, n_patterns=2, pattern_seconds=10 / 30, max_iters=50))
    assert np.all(a.trains == 0)
    assert tr.final_objective == pytest.approx(0.5 * np.sum(f.samples ** 2))


def test_fit_is_deterministic():
    f, _, _ = _small_planted(4)
    cfg = SolverConfig(lam=0.1, n_patterns=2, pattern_seconds=10 / 30, max_iters=40, seed=9)
    d1, a1, t1 = fit(f, cfg)
    d2, a2, t2 = fit(f, cfg)
    assert t1.objective == t2.objective
    np.testing.assert_array_equal(d1.patterns, d2.patterns)
    np.testing.assert_array_equal(a1.trains, a2.trains)


def test_fit_recovers_small_planted_patterns():
    f, true_d, _ = _small_planted(5)
    d, a, tr = fit(f, SolverConfig(lam=0.1, n_patterns=2, pattern_seconds=10 / 30, max_iters=300, seed=0))
    model = reconstruct(d, a, f.n_samples).samples
    assert np.sum((f.samples - model) ** 2) / np.sum(f.samples ** 2) <= 0.05
    assert min(match_patterns(true_d.patterns, d.patterns)) >= 0.9


# --- fixture helpers ------------------------------------------------------------------------

def test_sisc_fixture_noise_free_is_exact_model():
    f, d, a = make_sisc_fixture(7, noise=0.0)
    np.testing.assert_array_equal(f.samples, reconstruct(d, a, f.n_samples).samples)
    starts = [np.flatnonzero(t) for t in a.trains]
    assert all(len(s) == 10 for s in starts)
    allstarts = np.sort(np.concatenate(starts))
    assert np.all(np.diff(allstarts) >= 30) and allstarts[-1] <= 3000 - 30


def test_shift_ncc_oracle(rng):
    a = rng.normal(size=(8, 2))
    b = np.zeros_like(a)
    b[3:] = 2.5 * a[:5]
    score, shift = shift_ncc(a, b)
    assert shift == 3
    # exhaustive oracle on the overlap only
    expected = np.sum(a[:5] * b[3:]) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert score == pytest.approx(expected)
    assert shift_ncc(a, a)[0] == pytest.approx(1.0)
