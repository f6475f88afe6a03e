import math

import numpy as np
import pytest

from mixsig.errors import ParameterError
from mixsig.graphs import Graph, eigen_centrality, generate_cp_graph, spectrum


def complete(n):
    return Graph(np.ones((n, n)) - np.eye(n))


def star(leaves):
    A = np.zeros((leaves + 1, leaves + 1))
    A[0, 1:] = A[1:, 0] = 1
    return Graph(A)


def test_cp_graph_core_is_complete():
    g = generate_cp_graph(100, 10, 0.2, 0.05, np.random.default_rng(0))
    core = sorted(g.core_set)
    assert len(core) == 10
    sub = g.adjacency[np.ix_(core, core)]
    assert int(np.triu(sub, 1).sum()) == 45
    A = g.adjacency
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(A) == 0)
    assert set(np.unique(A)) <= {0.0, 1.0}


def test_all_core_graph_is_complete():
    g = generate_cp_graph(5, 5, 0.3, 0.7, np.random.default_rng(1))
    assert g.n_edges == 10
    assert np.array_equal(g.adjacency, complete(5).adjacency)


def test_edge_count_matches_bernoulli_moments():
    n, core, p_cp, p_pp = 200, 10, 0.2, 0.05
    npp = math.comb(n - core, 2)
    ncp = core * (n - core)
    mean = 45 + p_cp * ncp + p_pp * npp
    sd = math.sqrt(ncp * p_cp * (1 - p_cp) + npp * p_pp * (1 - p_pp))
    g = generate_cp_graph(n, core, p_cp, p_pp, np.random.default_rng(2))
    assert abs(g.n_edges - mean) <= 4 * sd


@pytest.mark.parametrize("args", [(10, 0, 0.2, 0.1), (10, 11, 0.2, 0.1), (10, 3, 1.2, 0.1), (10, 3, 0.2, -0.1)])
def test_cp_graph_rejects_bad_parameters(args):
    with pytest.raises(ParameterError):
        generate_cp_graph(*args, rng=np.random.default_rng(0))


def test_core_nodes_chosen_uniformly():
    counts = np.zeros(20)
    rng = np.random.default_rng(3)
    for _ in range(2000):
        g = generate_cp_graph(20, 5, 0.0, 0.0, rng)
        counts[list(g.core_set)] += 1
    # each node is core with probability 1/4; binomial sd ~ 19.4
    assert np.all(np.abs(counts - 500) < 4 * math.sqrt(2000 * 0.25 * 0.75))


@pytest.mark.parametrize(
    "A",
    [np.array([[0, 1], [0, 0]]), np.array([[1.0, 0], [0, 0]]), -(np.ones((3, 3)) - np.eye(3))],
    ids=["asymmetric", "diagonal", "negative"],
)
def test_graph_rejects_invalid_adjacency(A):
    with pytest.raises(ParameterError):
        Graph(A)


def test_spectrum_of_complete_graph():
    s = spectrum(complete(5))
    np.testing.assert_allclose(s.eigenvalues, [4, -1, -1, -1, -1], atol=1e-12)


def test_spectrum_of_zero_matrix():
    s = spectrum(np.zeros((4, 4)))
    np.testing.assert_array_equal(s.eigenvalues, 0)


def test_spectrum_reconstructs_random_symmetric():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((6, 6))
    A = M + M.T
    s = spectrum(A)
    V, lam = s.eigenvectors, s.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    np.testing.assert_allclose(V @ np.diag(lam) @ V.T, A, atol=1e-8)
    np.testing.assert_allclose(V.T @ V, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(A @ V, V * lam, atol=1e-8 * np.linalg.norm(A))


def test_spectrum_is_deterministic():
    g = generate_cp_graph(50, 5, 0.2, 0.05, np.random.default_rng(5))
    a, b = spectrum(g), spectrum(g.adjacency.copy())
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_centrality_of_complete_graph_is_uniform():
    v = eigen_centrality(complete(7))
    np.testing.assert_allclose(v, np.full(7, 1 / math.sqrt(7)), atol=1e-12)


def test_centrality_of_star():
    v = eigen_centrality(star(4))
    # analytic top eigenpair of K_{1,4}: lambda = 2, v = (2, 1, 1, 1, 1) / sqrt(8)
    np.testing.assert_allclose(v, np.array([2, 1, 1, 1, 1]) / math.sqrt(8), atol=1e-12)
    assert v[0] == pytest.approx(0.7071, abs=1e-4)


def test_centrality_of_path_p2():
    v = eigen_centrality(Graph(np.array([[0.0, 1.0], [1.0, 0.0]])))
    np.testing.assert_allclose(v, [1 / math.sqrt(2)] * 2, atol=1e-12)


def test_centrality_is_unit_top_eigenvector_with_sign_convention():
    g = generate_cp_graph(60, 6, 0.2, 0.05, np.random.default_rng(6))
    v = eigen_centrality(g)
    lam1 = g.spectrum.eigenvalues[0]
    assert np.linalg.norm(v) == pytest.approx(1.0)
    np.testing.assert_allclose(g.adjacency @ v, lam1 * v, atol=1e-8 * lam1)
    assert v[np.argmax(np.abs(v))] > 0


@pytest.mark.parametrize("seed", range(20))
def test_cp_graphs_have_eigengap_and_central_core(seed):
    g = generate_cp_graph(100, 10, 0.2, 0.05, np.random.default_rng(seed))
    lam = g.spectrum.eigenvalues
    assert lam[0] - lam[1] > 0
    v = np.abs(eigen_centrality(g))
    core = np.zeros(100, dtype=bool)
    core[list(g.core_set)] = True
    assert v[core].mean() > v[~core].mean()


def test_spectrum_invariant_under_relabeling():
    rng = np.random.default_rng(7)
    g = generate_cp_graph(40, 5, 0.2, 0.05, rng)
    perm = rng.permutation(40)
    h = Graph(g.adjacency[np.ix_(perm, perm)])
    np.testing.assert_allclose(h.spectrum.eigenvalues, g.spectrum.eigenvalues, atol=1e-8)


def test_csv_roundtrip(tmp_path):
    g = generate_cp_graph(15, 3, 0.3, 0.1, np.random.default_rng(8))
    g.to_csv(tmp_path / "A.csv")
    h = Graph.from_csv(tmp_path / "A.csv")
    np.testing.assert_array_equal(h.adjacency, g.adjacency)
    assert h.core_set == frozenset()


def test_disconnected_graph_warns():
    with pytest.warns(RuntimeWarning):
        generate_cp_graph(10, 2, 0.0, 0.0, np.random.default_rng(0))
