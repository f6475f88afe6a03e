"""Regularized EM for mixtures of filtered graph signals.

Each component ``c`` explains a sample as ``y = (L_c + S) z + noise`` where
``L_c`` is (close to) low rank and ``S`` is a sparse term shared by all
components. The E-step computes soft assignments of samples to components;
the M-step refits ``P``, every ``L_c`` and ``S`` from responsibility-weighted
second moments.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from scipy.special import logsumexp

from mixsig.errors import DegenerateError, ParameterError
from mixsig.graphs import _fix_signs
from mixsig.solver import MStepProblem, SolverConfig, nuclear_norm, solve_mstep
from mixsig.spectral import kmeans, random_init, signal_embedding, soft_init

log = logging.getLogger(__name__)

RESP_FLOOR = 1e-300


@dataclass
class Theta:
    L: List[np.ndarray]
    S: np.ndarray
    P: np.ndarray

    @property
    def C(self) -> int:
        return len(self.L)

    @classmethod
    def zeros(cls, n: int, k: int, C: int) -> "Theta":
        return cls([np.zeros((n, k)) for _ in range(C)], np.zeros((n, k)), np.full(C, 1.0 / C))

    def permuted(self, perm) -> "Theta":
        """Component ``j`` of the result is component ``perm[j]`` of this one."""
        return Theta([self.L[p] for p in perm], self.S, self.P[list(perm)])


@dataclass
class SuffStats:
    Pbar: np.ndarray
    YZbar: List[np.ndarray]
    ZZbar: List[np.ndarray]


@dataclass
class EMConfig:
    """Settings for `run_em`.

    ``init`` is ``"spectral"``, ``"random"`` or an m x C responsibility matrix.
    """

    sigma2: float
    T_max: int = 100
    lambda_L: float = 1.0
    lambda_S: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    init: Union[str, np.ndarray] = "spectral"
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100

    def __post_init__(self):
        if self.T_max < 1:
            raise ParameterError(f"T_max must be >= 1, got {self.T_max}")
        if not self.sigma2 > 0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass
class EMResult:
    theta: Theta
    W: np.ndarray
    w_hat: np.ndarray
    centralities: List[np.ndarray]
    objective_trace: List[float]
    label_trace: List[np.ndarray] = field(default_factory=list, repr=False)
    W0: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "P": self.theta.P.tolist(),
            "w_hat": (self.w_hat + 1).tolist(),
            "centralities": [c.tolist() for c in self.centralities],
            "objective_trace": list(map(float, self.objective_trace)),
        }

    def save(self, outdir, matrices: bool = False) -> None:
        """Write ``result.json`` and, if `matrices`, ``L_<c>.csv`` / ``S.csv``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "result.json", "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        if matrices:
            for c, Lc in enumerate(self.theta.L, start=1):
                np.savetxt(outdir / f"L_{c}.csv", Lc, delimiter=",", fmt="%.17g")
            np.savetxt(outdir / "S.csv", self.theta.S, delimiter=",", fmt="%.17g")


def _sq_residuals(theta: Theta, Y, Z):
    # m x C matrix of ||y_l - (S + L_c) z_l||^2
    SZ = theta.S @ Z
    return np.stack([np.sum((Y - SZ - Lc @ Z) ** 2, axis=0) for Lc in theta.L], axis=1)


def _log_joint(theta: Theta, Y, Z, sigma2):
    with np.errstate(divide="ignore"):
        logP = np.log(np.asarray(theta.P, dtype=float))
    return logP[None, :] - _sq_residuals(theta, Y, Z) / (2.0 * sigma2)


def e_step(theta: Theta, Y, Z, sigma2: float) -> np.ndarray:
    """Posterior probabilities of each component for every sample (m x C)."""
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be positive, got {sigma2}")
    P = np.asarray(theta.P, dtype=float)
    if np.any(P < 0) or not np.any(P > 0):
        raise ParameterError(f"mixing weights must be nonnegative and not all zero, got {P}")
    logits = _log_joint(theta, Y, Z, sigma2)
    logits -= logits.max(axis=1, keepdims=True)
    W = np.exp(logits)
    W /= W.sum(axis=1, keepdims=True)
    if np.any(W < RESP_FLOOR):
        W = np.maximum(W, RESP_FLOOR)
        W /= W.sum(axis=1, keepdims=True)
    return W


def sufficient_stats(W, Y, Z) -> SuffStats:
    W = np.asarray(W, dtype=float)
    m = W.shape[0]
    YZ, ZZ = [], []
    for c in range(W.shape[1]):
        Zw = Z * W[:, c]
        YZ.append(Y @ Zw.T / m)
        G = Zw @ Z.T / m
        ZZ.append(0.5 * (G + G.T))
    return SuffStats(W.mean(axis=0), YZ, ZZ)


def m_step(stats: SuffStats, cfg: EMConfig, warm: Optional[Theta] = None) -> Theta:
    Pbar = np.asarray(stats.Pbar, dtype=float)
    P = Pbar / Pbar.sum()
    problem = MStepProblem(stats, cfg.sigma2, cfg.lambda_L, cfg.lambda_S)
    init = None if warm is None else (warm.L, warm.S)
    L, S, _ = solve_mstep(problem, init, cfg.solver)
    return Theta(L, S, P)


def map_objective(theta: Theta, Y, Z, sigma2: float, lambda_L: float, lambda_S: float) -> float:
    """Penalized average log-likelihood (the quantity EM increases)."""
    n = Y.shape[0]
    ll = logsumexp(_log_joint(theta, Y, Z, sigma2), axis=1) - 0.5 * n * np.log(2 * np.pi * sigma2)
    penalty = lambda_S * float(np.abs(theta.S).sum()) + lambda_L * sum(nuclear_norm(Lc) for Lc in theta.L)
    return float(ll.mean()) - penalty


def centrality_from_L(L: np.ndarray) -> np.ndarray:
    """Top left singular vector of `L`, largest-magnitude entry positive."""
    L = np.asarray(L, dtype=float)
    if not np.any(L):
        raise DegenerateError("centrality of an all-zero matrix is undefined")
    U, _, _ = np.linalg.svd(L, full_matrices=False)
    return _fix_signs(U[:, :1])[:, 0]


def hard_labels(W: np.ndarray) -> np.ndarray:
    return np.argmax(W, axis=1)


def initial_responsibilities(Y, C: int, cfg: EMConfig, rng) -> np.ndarray:
    if isinstance(cfg.init, str):
        if cfg.init == "spectral":
            emb = signal_embedding(Y, C)
            _, centroids = kmeans(emb, C, cfg.kmeans_restarts, cfg.kmeans_max_iter, rng)
            return soft_init(emb, centroids)
        if cfg.init == "random":
            return random_init(Y.shape[1], C, rng)
        raise ParameterError(f"unknown init {cfg.init!r}")
    W = np.asarray(cfg.init, dtype=float)
    if W.shape != (Y.shape[1], C):
        raise ParameterError(f"given responsibilities have shape {W.shape}, expected {(Y.shape[1], C)}")
    return W


def extract_centralities(theta: Theta) -> List[np.ndarray]:
    out = []
    for c, Lc in enumerate(theta.L):
        try:
            out.append(centrality_from_L(Lc))
        except DegenerateError:
            warnings.warn(f"L_{c} is zero; its centrality estimate is undefined", RuntimeWarning)
            out.append(np.zeros(Lc.shape[0]))
    return out


def run_em(Y, Z, C: int, cfg: EMConfig, rng=None) -> EMResult:
    """Fit the mixture and return labels and per-component centralities.

    Parameters
    ----------
    Y : np.ndarray
        n x m observed signals.
    Z : np.ndarray
        k x m known excitation parameters.
    C : int
        Number of components.
    cfg : EMConfig
    rng : np.random.Generator or seed, optional
        Used by the initializer only.
    """
    if C < 1:
        raise ParameterError(f"C must be positive, got {C}")
    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, m = Y.shape
    k = Z.shape[0]
    if Z.shape[1] != m:
        raise ParameterError(f"Y has {m} columns but Z has {Z.shape[1]}")
    rng = np.random.default_rng(rng)

    W = initial_responsibilities(Y, C, cfg, rng)
    W0 = W
    theta = Theta.zeros(n, k, C)
    trace, labels = [], []
    for t in range(cfg.T_max):
        stats = sufficient_stats(W, Y, Z)
        theta = m_step(stats, cfg, warm=theta)
        W = e_step(theta, Y, Z, cfg.sigma2)
        trace.append(map_objective(theta, Y, Z, cfg.sigma2, cfg.lambda_L, cfg.lambda_S))
        labels.append(hard_labels(W))
        log.debug("EM iteration %d: objective %.10g", t + 1, trace[-1])
    return EMResult(theta, W, hard_labels(W), extract_centralities(theta), trace, labels, W0)
