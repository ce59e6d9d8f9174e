import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lpvssa.covariances import MatrixSeries, exact_psi_uy, exact_psi_ys
from lpvssa.errors import IndefiniteError, LyapunovError, RealizationError, ShapeError
from lpvssa.hankel import Selection, build_hankel, build_shifted_hankel, required_words, search_selection, search_words
from lpvssa.model import LpvSsaModel, generate, predict_one_step, stability_radius, sub_markov, sub_markov_levels
from lpvssa.realization import (
    DeterministicRealization,
    StochasticRealization,
    compose,
    ho_kalman,
    lyapunov_residual,
    realize_deterministic,
    realize_stochastic,
    solve_stationary_lyapunov,
    stochastic_recursion,
)
from lpvssa.words import enumerate_words
from oracles import lyapunov_fixed_point, random_model, scalar_recursion_fixed_point


def markov_gap(m1, m2, max_len):
    a = sub_markov_levels(m1.A, m1.B, m1.C, max_len)
    b = sub_markov_levels(m2.A, m2.B, m2.C, max_len)
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def test_ho_kalman_identity_case():
    n = 3
    e1 = np.eye(n)[:, :1]
    r = ho_kalman(np.eye(n), np.zeros((2, n, n)), np.array([e1, e1]), e1.T, np.zeros((1, 1)))
    assert not r.A.any()
    assert np.array_equal(r.B[0], e1) and np.array_equal(r.C, e1.T) and not r.D.any()


def test_ho_kalman_rejects_singular():
    H = np.diag([1.0, 1e-12])
    with pytest.raises(RealizationError) as info:
        ho_kalman(H, np.zeros((1, 2, 2)), np.zeros((1, 2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    assert info.value.sv_ratio == pytest.approx(1e-12)


def test_ho_kalman_warns_when_ill_conditioned():
    H = np.diag([1.0, 1e-7])
    with pytest.warns(RuntimeWarning):
        ho_kalman(H, np.zeros((1, 2, 2)), np.zeros((1, 2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))


def test_ho_kalman_shape_errors():
    with pytest.raises(ShapeError):
        ho_kalman(np.eye(2), np.zeros((1, 3, 3)), np.zeros((1, 2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(ShapeError):
        ho_kalman(np.ones((2, 3)), np.zeros((1, 2, 3)), np.zeros((1, 2, 1)), np.zeros((1, 3)), np.zeros((1, 1)))


def test_example_exact_realization(example, selections):
    s = exact_psi_uy(example, required_words(selections[0], 2))
    r = realize_deterministic(s, selections[0], 2)
    for w, v in {(1, 1): 0.8, (2, 1): 0.4, (1, 1, 1): 0.32, (2, 2, 1): 0.16, (1, 1, 1, 1): 0.128}.items():
        assert sub_markov(r, w).item() == pytest.approx(v, abs=1e-12)
    assert markov_gap(r, example, 8) < 1e-9
    # shifted Hankels are consistent with the realized state matrices
    H = build_hankel(s, selections[0])
    for sigma in (1, 2):
        assert np.allclose(H @ r.A[sigma - 1], build_shifted_hankel(s, selections[0], sigma))


def test_zero_series_is_a_realization_error(selections):
    zero = MatrixSeries(1, 1, {w: np.zeros((1, 1)) for w in required_words(selections[0], 2)})
    with pytest.raises(RealizationError):
        realize_deterministic(zero, selections[0], 2)


@pytest.mark.parametrize("seed", range(10))
def test_ho_kalman_exact_on_random_models(seed):
    rng = np.random.default_rng(seed)
    n_x, n_mu = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    m = random_model(rng, n_x, n_mu, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    s = exact_psi_uy(m, search_words(n_mu, n_x))
    r = realize_deterministic(s, search_selection(s, n_x, n_mu), n_mu)
    assert markov_gap(r, m, 2 * n_x + 2) < 1e-9
    assert np.allclose(r.D, m.D)
    # the realized family is stable when the generator is
    assert stability_radius(r.A, m.p) == pytest.approx(stability_radius(m), abs=1e-8)


def test_svd_truncation_on_oversized_selection(example):
    s = exact_psi_uy(example, search_words(2, 3))
    sel = search_selection(s, 3, 2)
    big = Selection(sel.alpha + (((1, 1), 1),), sel.beta + ((2, (2,), 1),))
    with pytest.raises(RealizationError):
        realize_deterministic(exact_psi_uy(example, required_words(big, 2)), big, 2)
    r = realize_deterministic(exact_psi_uy(example, required_words(big, 2)), big, 2, order=3)
    assert r.n_x == 3 and markov_gap(r, example, 6) < 1e-9


def test_lyapunov_scalar():
    P = solve_stationary_lyapunov([[[0.5]]], [[[1.0]]], [[1.0]], [1.0])
    assert P.item() == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_lyapunov_zero_dynamics(rng):
    B = rng.standard_normal((3, 2, 2))
    L = np.array([[1.0, 0.3], [0.3, 0.5]])
    p = [1.0, 0.4, 0.9]
    P = solve_stationary_lyapunov(np.zeros((3, 2, 2)), B, L, p)
    base = sum(b @ L @ b.T for b in B)
    for s in range(3):
        assert np.allclose(P[s], p[s] * base)


def test_lyapunov_example_against_fixed_point(example):
    L = np.eye(1) * 0.75
    P = solve_stationary_lyapunov(example.A, example.B, L, example.p)
    assert lyapunov_residual(P, example.A, example.B, L, example.p) < 1e-10
    ref = lyapunov_fixed_point(list(example.A), list(example.B), L, list(example.p))
    assert max(np.abs(a - b).max() for a, b in zip(P, ref)) < 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_lyapunov_residual_random(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_model(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), 1, 2, radius=0.9)
    L = np.array([[1.0, 0.2], [0.2, 0.6]])
    P = solve_stationary_lyapunov(m.A, m.B, L, m.p)
    assert lyapunov_residual(P, m.A, m.B, L, m.p) < 1e-10
    for x in P:
        assert np.allclose(x, x.T) and np.linalg.eigvalsh(x)[0] > -1e-12


def test_lyapunov_unstable():
    with pytest.raises(LyapunovError):
        solve_stationary_lyapunov([[[1.2]]], [[[1.0]]], [[1.0]], [1.0])


def test_recursion_with_zero_input_matrix(rng):
    A = 0.3 * rng.standard_normal((2, 2, 2))
    T = np.array([[[2.0]], [[3.0]]])
    p = [1.0, 0.5]
    out = stochastic_recursion(A, np.zeros((2, 2, 1)), np.array([[1.0, 0.5]]), T, p, max_iter=10)
    assert not out["K"].any() and not out["P"].any()
    assert np.allclose(out["Q"][1], 0.5 * 3.0)
    assert out["converged"] and out["iterations"] == 1


@given(st.floats(-0.9, 0.9), st.floats(-1.5, 1.5), st.floats(0.2, 3.0))
def test_scalar_recursion_against_fixed_point(a, k, q):
    # covariance data of x+ = a x + k e, y = x + e with var(e) = q
    assume(abs(a - k) < 0.95)
    P_true = k * k * q / (1 - a * a)
    m, g = P_true + q, a * P_true + k * q
    out = stochastic_recursion([[[a]]], [[[g]]], [[1.0]], [[[m]]], [1.0], max_iter=20000, tol=1e-14)
    first = stochastic_recursion([[[a]]], [[[g]]], [[1.0]], [[[m]]], [1.0], max_iter=1)
    assert first["P"].item() == pytest.approx(g * g / m)
    P, K, Q = scalar_recursion_fixed_point(a, g, 1.0, m)
    assert out["P"].item() == pytest.approx(P, abs=1e-6)
    assert out["K"].item() == pytest.approx(K, abs=1e-6)
    assert out["Q"].item() == pytest.approx(Q, abs=1e-6)
    # the innovation model is recovered
    assert out["Q"].item() == pytest.approx(q, rel=1e-5)
    assert out["K"].item() == pytest.approx(k, abs=1e-5)


def test_recursion_detects_indefinite_innovation():
    with pytest.raises(IndefiniteError) as info:
        stochastic_recursion([[[0.5]]], [[[1.0]]], [[1.0]], [[[0.1]]], [1.0], max_iter=50)
    assert info.value.sigma == 1


def test_stochastic_realization_of_exact_covariances(example, selections):
    words = [w for w in required_words(selections[1], 2) if w]
    psi, T = exact_psi_ys(example, words)
    r = realize_stochastic(psi, T, selections[1], example.p, max_iter=200)
    assert r.converged
    # the generating noise model is already in innovation form
    assert np.allclose(r.Q, example.Q, atol=1e-6)
    assert min(r.min_eig_P) >= -1e-10
    noise_only = LpvSsaModel(example.A, 0 * example.B, example.K, example.Q, example.C, 0 * example.D, example.p)
    stoch_model = LpvSsaModel(r.A_s, np.zeros((2, 3, 1)), r.K, r.Q, r.C_s, np.zeros((1, 1)), example.p)
    # same covariance sequence of the realized and true noise models
    a, Ta = exact_psi_ys(noise_only, enumerate_words(2, 4)[1:])
    b, Tb = exact_psi_ys(stoch_model, enumerate_words(2, 4)[1:])
    assert np.allclose(Ta, Tb, atol=1e-6)
    for w in enumerate_words(2, 4)[1:]:
        assert np.allclose(a[w], b[w], atol=1e-6)


def test_recursion_state_moment_matches_simulation(example, selections, signals):
    # P_sigma of the recursion is E[x x^T mu_sigma^2] of the realized innovation-form state
    words = [w for w in required_words(selections[1], 2) if w]
    psi, T = exact_psi_ys(example, words)
    r = realize_stochastic(psi, T, selections[1], example.p, max_iter=200)
    inov = LpvSsaModel(r.A_s, np.zeros((2, 3, 1)), r.K, r.Q, r.C_s, np.zeros((1, 1)), example.p)
    from lpvssa.realization import stationary_state_covariance

    S = stationary_state_covariance(r.A_s, example.p, sum(k @ q @ k.T for k, q in zip(r.K, r.Q)))
    for s in range(2):
        assert np.allclose(r.P[s], example.p[s] * S, atol=1e-6)
    assert stability_radius(inov) < 1


def test_degenerate_stochastic_part(selections):
    words = [w for w in required_words(selections[1], 2) if w]
    psi = MatrixSeries(1, 1, {w: np.full((1, 1), 1e-9) for w in words})
    r = realize_stochastic(psi, np.full((2, 1, 1), 1e-9), selections[1], [1.0, 0.75])
    assert r.degenerate and r.n_x == 0


def test_compose_blocks(rng):
    det = DeterministicRealization(0.4 * rng.standard_normal((2, 1, 1)), rng.standard_normal((2, 1, 1)),
                                   rng.standard_normal((1, 1)), rng.standard_normal((1, 1)))
    stoch = StochasticRealization(
        A_s=0.3 * rng.standard_normal((2, 2, 2)), G=np.zeros((2, 2, 1)), C_s=rng.standard_normal((1, 2)),
        K=rng.standard_normal((2, 2, 1)), Q=np.array([[[1.0]], [[0.5]]]), P=np.zeros((2, 2, 2)),
        iterations_used=1, converged=True,
    )
    m = compose(det, stoch, [1.0, 0.5])
    assert m.n_x == 3
    assert not m.B[:, 1:].any() and not m.K[:, :1].any()
    assert np.array_equal(m.A[:, 1:, 1:], stoch.A_s) and not m.A[:, :1, 1:].any()
    for w in enumerate_words(2, 4):
        assert np.array_equal(sub_markov(m, w), sub_markov(det, w))


def test_compose_with_empty_noise_block(example):
    det = DeterministicRealization(example.A, example.B, example.C, example.D)
    empty = StochasticRealization(np.zeros((2, 0, 0)), np.zeros((2, 0, 1)), np.zeros((1, 0)), np.zeros((2, 0, 1)),
                                  np.zeros((2, 1, 1)), np.zeros((2, 0, 0)), 0, True, degenerate=True)
    m = compose(det, empty, example.p)
    assert np.array_equal(m.A, example.A) and not m.K.any()


def test_compose_dimension_mismatch(example):
    det = DeterministicRealization(example.A, example.B, example.C, example.D)
    bad = StochasticRealization(np.zeros((2, 1, 1)), np.zeros((2, 1, 2)), np.zeros((2, 1)), np.zeros((2, 1, 2)),
                                np.zeros((2, 2, 2)), np.zeros((2, 1, 1)), 0, True)
    with pytest.raises(ShapeError):
        compose(det, bad, example.p)


@pytest.mark.slow
def test_innovation_variance_from_monte_carlo(example, selections, signals):
    # noise-only version of the example; its innovation variance is the one-step error of the true predictor
    noise_only = LpvSsaModel(example.A, 0 * example.B, example.K, example.Q, example.C, 0 * example.D, example.p)
    data, _ = generate(noise_only, 1_000_000, 21, signals)
    words = [w for w in required_words(selections[1], 2) if w]
    from lpvssa.covariances import empirical_output_moments

    psi, T = empirical_output_moments(data, words, example.p)
    r = realize_stochastic(psi, T, selections[1], example.p)
    e = data.y - predict_one_step(noise_only, data)
    assert r.Q[0].item() == pytest.approx(float(np.mean(e[1000:] ** 2)), rel=0.10)
