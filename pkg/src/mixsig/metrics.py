"""Clustering and centrality evaluation."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from mixsig.errors import ParameterError

EXHAUSTIVE_MAX_C = 10


def _contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts, total):
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Normalized mutual information ``I(a; b) / sqrt(H(a) H(b))``, natural log.

    Two single-class partitions score 1; a single-class partition against a
    multi-class one scores 0.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"label vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ParameterError("label vectors are empty")
    table = _contingency(a, b)
    N = float(a.size)
    ha = _entropy(table.sum(1), N)
    hb = _entropy(table.sum(0), N)
    if ha == 0 and hb == 0:
        return 1.0
    if ha == 0 or hb == 0:
        return 0.0
    pij = table / N
    nz = pij > 0
    outer = np.outer(table.sum(1), table.sum(0)) / N**2
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


def best_permutation(score: np.ndarray) -> tuple:
    """Permutation ``pi`` maximizing ``sum_c score[c, pi[c]]``.

    `score[c, j]` rates matching true component ``c`` with estimated component
    ``j``. Exhaustive search (ties resolved to the lexicographically smallest
    permutation) up to C = 10, Hungarian assignment beyond.
    """
    score = np.asarray(score, dtype=float)
    C = score.shape[0]
    if score.shape != (C, C):
        raise ParameterError(f"score matrix must be square, got {score.shape}")
    if C > EXHAUSTIVE_MAX_C:
        _, cols = linear_sum_assignment(score, maximize=True)
        return tuple(int(c) for c in cols)
    rows = np.arange(C)
    best, best_val = None, -np.inf
    for perm in itertools.permutations(range(C)):
        val = score[rows, perm].sum()
        if val > best_val:
            best, best_val = perm, val
    return best


def label_agreement(true_labels, est_labels, C: int) -> np.ndarray:
    """C x C counts of samples with true label ``c`` and estimate ``j``."""
    table = np.zeros((C, C))
    np.add.at(table, (np.asarray(true_labels), np.asarray(est_labels)), 1)
    return table


def top_k_nodes(centrality, top_k: int) -> set:
    """Indices of the `top_k` largest ``|centrality|`` entries; lower index wins ties."""
    mag = np.abs(np.asarray(centrality, dtype=float))
    order = np.lexsort((np.arange(mag.size), -mag))
    return set(order[:top_k].tolist())


def core_overlap(est_centralities, true_core_sets, top_k: int) -> np.ndarray:
    C = len(true_core_sets)
    detected = [top_k_nodes(v, top_k) for v in est_centralities]
    return np.array([[len(set(true_core_sets[c]) & detected[j]) for j in range(C)] for c in range(C)], dtype=float)


def centrality_error_rate(est_centralities, true_core_sets, top_k: int = 10) -> float:
    """Fraction of true core nodes missed by the top-`top_k` estimated nodes.

    Components are matched to graphs by the permutation with the largest
    total overlap.
    """
    C = len(true_core_sets)
    if len(est_centralities) != C:
        raise ParameterError(f"{len(est_centralities)} estimates for {C} graphs")
    for s in true_core_sets:
        if len(s) != top_k:
            raise ParameterError(f"core set of size {len(s)} does not match top_k={top_k}")
    overlap = core_overlap(est_centralities, true_core_sets, top_k)
    perm = best_permutation(overlap)
    hit = sum(overlap[c, perm[c]] for c in range(C))
    return float(1.0 - hit / (C * top_k))
