"""Spectral clustering of graph signals and EM initialization."""

from __future__ import annotations

import numpy as np
from scipy.special import softmax

from mixsig.errors import ParameterError
from mixsig.graphs import _fix_signs

RANK_TOL = 1e-10


def signal_embedding(Y: np.ndarray, C: int) -> np.ndarray:
    """Top-`C` unit eigenvectors of ``Y.T @ Y`` as columns of an m x C matrix.

    Columns are ordered by decreasing eigenvalue. Directions with (numerically)
    zero eigenvalue are replaced by zero columns.
    """
    Y = np.asarray(Y, dtype=float)
    n, m = Y.shape
    if m < C:
        raise ParameterError(f"need at least C={C} samples, got {m}")
    if m <= 4 * n:
        vals, vecs = np.linalg.eigh(Y.T @ Y)
        order = np.argsort(-vals, kind="stable")[:C]
        vals, vecs = vals[order], vecs[:, order]
    else:
        _, s, Vt = np.linalg.svd(Y, full_matrices=False)
        vals = np.zeros(C)
        vecs = np.zeros((m, C))
        r = min(C, s.size)
        vals[:r] = s[:r] ** 2
        vecs[:, :r] = Vt[:r].T
    scale = max(vals[0], 0.0) if vals.size else 0.0
    keep = vals > RANK_TOL * max(scale, 1.0)
    emb = np.where(keep, _fix_signs(vecs), 0.0)
    return emb


def _wcss(X, labels, centroids):
    return float(np.sum((X - centroids[labels]) ** 2))


def _sq_dists(X, centroids):
    d = (X**2).sum(1)[:, None] - 2 * X @ centroids.T + (centroids**2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X, C, rng):
    m = X.shape[0]
    centroids = np.empty((C, X.shape[1]))
    centroids[0] = X[rng.integers(m)]
    d2 = ((X - centroids[0]) ** 2).sum(1)
    for j in range(1, C):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(m, p=d2 / total)
        else:
            idx = rng.integers(m)
        centroids[j] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[j]) ** 2).sum(1))
    return centroids


def _lloyd(X, centroids, max_iter):
    C = centroids.shape[0]
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(X, centroids)
        new = np.argmin(d, axis=1)
        # empty clusters take the point farthest from its own centroid
        for j in range(C):
            if not np.any(new == j):
                own = d[np.arange(len(new)), new]
                far = int(np.argmax(own))
                new[far] = j
                d[far] = 0.0
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.stack([X[labels == j].mean(0) for j in range(C)])
    return labels, centroids


def kmeans(X: np.ndarray, C: int, restarts: int = 10, max_iter: int = 100, rng=None):
    """Lloyd's k-means with k-means++ seeding, best of `restarts` by WCSS.

    Returns
    -------
    labels : np.ndarray
        Length-m integer labels in ``range(C)``.
    centroids : np.ndarray
        C x d matrix; each row is the mean of its assigned points.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < C:
        raise ParameterError(f"need at least C={C} points, got {X.shape[0]}")
    rng = np.random.default_rng(rng)
    best = None
    for _ in range(max(1, restarts)):
        labels, centroids = _lloyd(X, _kmeans_pp(X, C, rng), max_iter)
        score = _wcss(X, labels, centroids)
        # strict "<" keeps the earliest restart on ties
        if best is None or score < best[0]:
            best = (score, labels, centroids)
    return best[1], best[2]


def soft_init(embedding: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Softmax of negative squared distances to the cluster centroids (m x C)."""
    E = np.asarray(embedding, dtype=float)
    V = np.asarray(centroids, dtype=float)
    d2 = ((E[:, None, :] - V[None, :, :]) ** 2).sum(-1)
    W = softmax(-d2, axis=1)
    return W / W.sum(axis=1, keepdims=True)


def random_init(m: int, C: int, rng) -> np.ndarray:
    """Rows drawn uniformly from the probability simplex."""
    if C < 1:
        raise ParameterError(f"C must be positive, got {C}")
    rng = np.random.default_rng(rng)
    return rng.dirichlet(np.ones(C), size=m)


def spectral_clustering(Y: np.ndarray, C: int, rng=None, restarts: int = 10, max_iter: int = 100):
    """Hard labels, embedding and centroids from k-means on the signal embedding."""
    emb = signal_embedding(Y, C)
    labels, centroids = kmeans(emb, C, restarts=restarts, max_iter=max_iter, rng=rng)
    return labels, emb, centroids
