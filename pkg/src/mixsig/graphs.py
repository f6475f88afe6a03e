"""Core-periphery graphs and their adjacency spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from mixsig.errors import ParameterError


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph stored as a dense symmetric adjacency matrix.

    Parameters
    ----------
    adjacency : np.ndarray
        n x n symmetric, nonnegative, zero-diagonal weight matrix.
    core_set : frozenset of int
        Core node indices used at generation time; empty for loaded graphs.
    """

    adjacency: np.ndarray
    core_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ParameterError(f"adjacency must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ParameterError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise ParameterError("adjacency must have a zero diagonal")
        if np.any(A < 0):
            raise ParameterError("adjacency must be nonnegative")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "core_set", frozenset(int(i) for i in self.core_set))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    @cached_property
    def spectrum(self) -> Spectrum:
        return spectrum(self.adjacency)

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.adjacency != 0, directed=False)
        return n_comp == 1

    def to_csv(self, path) -> None:
        np.savetxt(path, self.adjacency, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Graph":
        A = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        return cls(A)


def generate_cp_graph(
    n: int,
    core_size: int,
    p_core_periph: float,
    p_periph: float,
    rng: np.random.Generator,
) -> Graph:
    """Sample a two-block core-periphery graph.

    Core nodes are chosen uniformly at random and are fully connected to
    each other. Core-periphery pairs are linked with probability
    `p_core_periph`, periphery-periphery pairs with `p_periph`.
    """
    if not 1 <= core_size <= n:
        raise ParameterError(f"need 1 <= core_size <= n, got core_size={core_size}, n={n}")
    for name, p in (("p_core_periph", p_core_periph), ("p_periph", p_periph)):
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"{name} must lie in [0, 1], got {p}")

    core = rng.choice(n, size=core_size, replace=False)
    is_core = np.zeros(n, dtype=bool)
    is_core[core] = True

    prob = np.full((n, n), p_periph)
    prob[np.ix_(is_core, ~is_core)] = p_core_periph
    prob[np.ix_(~is_core, is_core)] = p_core_periph
    prob[np.ix_(is_core, is_core)] = 1.0

    iu = np.triu_indices(n, k=1)
    edges = rng.random(iu[0].size) < prob[iu]
    A = np.zeros((n, n))
    A[iu] = edges
    A = A + A.T

    g = Graph(A, frozenset(core.tolist()))
    if not g.is_connected():
        warnings.warn("generated core-periphery graph is disconnected", RuntimeWarning)
    return g


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column made positive; first index on ties
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def spectrum(A) -> Spectrum:
    """Symmetric eigendecomposition with eigenvalues in descending order.

    Accepts a `Graph` or a raw symmetric array. Eigenvector signs follow
    the max-magnitude-positive convention.
    """
    if isinstance(A, Graph):
        A = A.adjacency
    A = np.asarray(A, dtype=float)
    vals, vecs = np.linalg.eigh(A)
    order = np.argsort(-vals, kind="stable")
    return Spectrum(vals[order], _fix_signs(vecs[:, order]))


def eigen_centrality(g: Graph) -> np.ndarray:
    """Unit-norm top eigenvector of the adjacency, max-magnitude entry positive."""
    if not g.is_connected():
        warnings.warn("eigen-centrality of a disconnected graph is not unique", RuntimeWarning)
    return g.spectrum.eigenvectors[:, 0].copy()
