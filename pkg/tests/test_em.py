import json
import time

import numpy as np
import pytest

from mixsig.em import (
    EMConfig,
    Theta,
    centrality_from_L,
    e_step,
    hard_labels,
    m_step,
    map_objective,
    run_em,
    sufficient_stats,
)
from mixsig.errors import DegenerateError, ParameterError
from mixsig.experiment import ExperimentConfig, generate_trial
from mixsig.metrics import nmi


def small_instance(seed, n=20, k=8, m=60, C=2, sigma2=0.01):
    rng = np.random.default_rng(seed)
    Ms = [rng.standard_normal((n, 2)) @ rng.standard_normal((2, k)) for _ in range(C)]
    Z = rng.uniform(0.1, 1, size=(k, m)) * (rng.random((k, m)) < 0.6)
    w = rng.integers(C, size=m)
    Y = np.stack([Ms[w[l]] @ Z[:, l] for l in range(m)], axis=1) + np.sqrt(sigma2) * rng.standard_normal((n, m))
    return Y, Z, w


@pytest.fixture(scope="module")
def strong_trial():
    cfg = ExperimentConfig(seed=99, C_values=[2], m_per_graph=100)
    return cfg, generate_trial(cfg, 2, 0)[1]


def test_e_step_single_component():
    Y, Z, _ = small_instance(0, C=1)
    theta = Theta.zeros(20, 8, 1)
    np.testing.assert_array_equal(e_step(theta, Y, Z, 0.01), np.ones((60, 1)))


def test_e_step_equal_components_split_evenly():
    rng = np.random.default_rng(1)
    Lc = rng.standard_normal((4, 3))
    theta = Theta([Lc, Lc.copy()], np.zeros((4, 3)), np.array([0.5, 0.5]))
    W = e_step(theta, rng.standard_normal((4, 9)), rng.standard_normal((3, 9)), 0.1)
    np.testing.assert_allclose(W, 0.5)


def test_e_step_scalar_closed_form():
    theta = Theta([np.ones((1, 1)), np.zeros((1, 1))], np.zeros((1, 1)), np.array([0.5, 0.5]))
    W = e_step(theta, np.ones((1, 1)), np.ones((1, 1)), 0.5)
    np.testing.assert_allclose(W, [[0.7310585786300049, 0.2689414213699951]], atol=1e-12)


def test_e_step_survives_huge_residuals():
    theta = Theta([np.full((1, 1), 1e3), np.zeros((1, 1))], np.zeros((1, 1)), np.array([0.5, 0.5]))
    W = e_step(theta, np.zeros((1, 1)), np.ones((1, 1)), 1e-4)
    assert np.all(np.isfinite(W))
    assert W[0, 1] == pytest.approx(1.0)
    assert W[0, 0] > 0


def test_e_step_rejects_zero_prior():
    theta = Theta.zeros(2, 2, 2)
    theta.P = np.zeros(2)
    with pytest.raises(ParameterError):
        e_step(theta, np.zeros((2, 3)), np.zeros((2, 3)), 0.1)


def test_sufficient_stats_single_component():
    Y, Z, _ = small_instance(2)
    st = sufficient_stats(np.ones((60, 1)), Y, Z)
    np.testing.assert_allclose(st.Pbar, [1.0])
    np.testing.assert_allclose(st.YZbar[0], Y @ Z.T / 60, atol=1e-12)
    np.testing.assert_allclose(st.ZZbar[0], Z @ Z.T / 60, atol=1e-12)


def test_sufficient_stats_even_split_is_symmetric():
    Y, Z, _ = small_instance(3)
    st = sufficient_stats(np.full((60, 2), 0.5), Y, Z)
    np.testing.assert_allclose(st.YZbar[0], st.YZbar[1])
    np.testing.assert_allclose(st.ZZbar[0], st.ZZbar[1])
    np.testing.assert_allclose(st.Pbar, [0.5, 0.5])


def test_sufficient_stats_brute_force():
    rng = np.random.default_rng(4)
    Y, Z = rng.standard_normal((3, 7)), rng.standard_normal((2, 7))
    W = rng.dirichlet(np.ones(3), size=7)
    st = sufficient_stats(W, Y, Z)
    for c in range(3):
        yz = sum(W[l, c] * np.outer(Y[:, l], Z[:, l]) for l in range(7)) / 7
        zz = sum(W[l, c] * np.outer(Z[:, l], Z[:, l]) for l in range(7)) / 7
        np.testing.assert_allclose(st.YZbar[c], yz, atol=1e-12)
        np.testing.assert_allclose(st.ZZbar[c], zz, atol=1e-12)
        assert st.Pbar[c] == pytest.approx(W[:, c].mean(), abs=1e-12)


def test_m_step_normalizes_prior():
    Y, Z, _ = small_instance(5)
    W = np.random.default_rng(5).dirichlet(np.ones(2), size=60)
    theta = m_step(sufficient_stats(W, Y, Z), EMConfig(sigma2=0.01))
    assert theta.P.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(theta.P, W.mean(0))


def test_m_step_on_zero_data_is_zero():
    Y, Z = np.zeros((4, 10)), np.zeros((3, 10))
    theta = m_step(sufficient_stats(np.full((10, 2), 0.5), Y, Z), EMConfig(sigma2=0.1))
    assert not theta.S.any() and not any(L.any() for L in theta.L)


def test_map_objective_at_zero_residual():
    theta = Theta.zeros(3, 2, 2)
    Y, Z = np.zeros((3, 5)), np.ones((2, 5))
    expected = -1.5 * np.log(2 * np.pi * 0.1)
    assert map_objective(theta, Y, Z, 0.1, 1.0, 1.0) == pytest.approx(expected)


def test_map_objective_decreases_with_heavier_penalty():
    rng = np.random.default_rng(6)
    theta = Theta([rng.standard_normal((3, 2)) for _ in range(2)], rng.standard_normal((3, 2)), np.array([0.4, 0.6]))
    Y, Z = rng.standard_normal((3, 5)), rng.standard_normal((2, 5))
    assert map_objective(theta, Y, Z, 0.1, 2.0, 0.2) < map_objective(theta, Y, Z, 0.1, 1.0, 0.1)


def test_map_objective_brute_force():
    rng = np.random.default_rng(7)
    n, k, m, s2 = 3, 2, 3, 0.3
    L = [rng.standard_normal((n, k)) for _ in range(2)]
    S = rng.standard_normal((n, k))
    P = np.array([0.3, 0.7])
    Y, Z = rng.standard_normal((n, m)), rng.standard_normal((k, m))
    total = 0.0
    for l in range(m):
        dens = 0.0
        for c in range(2):
            r = Y[:, l] - (L[c] + S) @ Z[:, l]
            dens += P[c] * (2 * np.pi * s2) ** (-n / 2) * np.exp(-r @ r / (2 * s2))
        total += np.log(dens)
    pen = 0.4 * np.abs(S).sum() + 0.5 * sum(np.linalg.svd(x, compute_uv=False).sum() for x in L)
    got = map_objective(Theta(L, S, P), Y, Z, s2, 0.5, 0.4)
    assert got == pytest.approx(total / m - pen, abs=1e-10)


def test_centrality_of_rank_one_matrix():
    u = np.array([3.0, 4.0, 0.0]) / 5
    np.testing.assert_allclose(centrality_from_L(np.outer(u, [1.0, -2.0])), u, atol=1e-12)


def test_centrality_of_diagonal_matrix():
    np.testing.assert_allclose(centrality_from_L(np.diag([1.0, 3.0, 2.0])), [0, 1, 0], atol=1e-12)


def test_centrality_of_zero_matrix_raises():
    with pytest.raises(DegenerateError):
        centrality_from_L(np.zeros((3, 2)))


def test_single_component_noiseless_fit_recovers_direction():
    rng = np.random.default_rng(8)
    u = rng.standard_normal(20)
    u /= np.linalg.norm(u)
    M = np.outer(u, rng.uniform(0.5, 1, 8))
    Z = rng.uniform(0.1, 1, size=(8, 80))
    res = run_em(M @ Z, Z, 1, EMConfig(sigma2=0.01, T_max=3, lambda_L=0.01, lambda_S=0.0))
    cos = abs(res.centralities[0] @ u)
    assert np.degrees(np.arccos(min(cos, 1.0))) <= 1.0


@pytest.mark.parametrize("seed", range(5))
def test_objective_is_non_decreasing(seed):
    Y, Z, _ = small_instance(seed + 10)
    cfg = EMConfig(sigma2=0.01, T_max=15, init="random")
    tr = np.array(run_em(Y, Z, 2, cfg, rng=seed).objective_trace)
    slack = 10 * cfg.solver.tol * np.maximum(1.0, np.abs(tr[:-1]))
    assert np.all(np.diff(tr) >= -slack)


def test_true_labels_are_a_fixed_point(strong_trial):
    cfg, ds = strong_trial
    W0 = np.eye(2)[ds.true_w]
    res = run_em(ds.Y, ds.Z, 2, EMConfig(sigma2=0.01, T_max=5, init=W0))
    np.testing.assert_array_equal(res.w_hat, ds.true_w)
    assert np.all(res.W.max(axis=1) > 0.99)


def test_permuting_initial_responsibilities_permutes_components(strong_trial):
    _, ds = strong_trial
    W0 = np.random.default_rng(9).dirichlet(np.ones(2), size=ds.Y.shape[1])
    a = run_em(ds.Y, ds.Z, 2, EMConfig(sigma2=0.01, T_max=4, init=W0))
    b = run_em(ds.Y, ds.Z, 2, EMConfig(sigma2=0.01, T_max=4, init=W0[:, ::-1]))
    np.testing.assert_allclose(b.W, a.W[:, ::-1], atol=1e-8)
    np.testing.assert_allclose(b.theta.P, a.theta.P[::-1], atol=1e-8)
    for x, y in zip(b.theta.L, a.theta.L[::-1]):
        np.testing.assert_allclose(x, y, atol=1e-8)


def test_spectral_init_recovers_strong_filter_labels(strong_trial):
    _, ds = strong_trial
    res = run_em(ds.Y, ds.Z, 2, EMConfig(sigma2=0.01, T_max=30), rng=0)
    assert nmi(res.w_hat, ds.true_w) >= 0.98
    assert len(res.objective_trace) == 30 and len(res.label_trace) == 30


def test_iteration_cost(strong_trial):
    _, ds = strong_trial
    t0 = time.perf_counter()
    run_em(ds.Y, ds.Z, 2, EMConfig(sigma2=0.01, T_max=5), rng=0)
    assert (time.perf_counter() - t0) / 5 < 2.0


def test_hard_labels():
    np.testing.assert_array_equal(hard_labels(np.array([[0.2, 0.8], [0.6, 0.4]])), [1, 0])


def test_result_json_uses_one_based_labels(tmp_path):
    Y, Z, _ = small_instance(11)
    res = run_em(Y, Z, 2, EMConfig(sigma2=0.01, T_max=2, init="random"), rng=1)
    res.save(tmp_path, matrices=True)
    d = json.loads((tmp_path / "result.json").read_text())
    assert set(d["w_hat"]) <= {1, 2}
    assert d["w_hat"] == (res.w_hat + 1).tolist()
    assert len(d["centralities"]) == 2 and len(d["centralities"][0]) == 20
    assert (tmp_path / "L_1.csv").exists() and (tmp_path / "S.csv").exists()


def test_run_em_validates_inputs():
    with pytest.raises(ParameterError):
        run_em(np.zeros((3, 4)), np.zeros((2, 5)), 2, EMConfig(sigma2=0.1))
    with pytest.raises(ParameterError):
        run_em(np.zeros((3, 4)), np.zeros((2, 4)), 2, EMConfig(sigma2=0.1, init="bogus"))
    with pytest.raises(ParameterError):
        EMConfig(sigma2=0.0)
