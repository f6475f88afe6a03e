"""Proximal gradient solver for the low-rank-plus-sparse M-step.

The problem solved is

    min_{L_1..L_C, S}  (1 / 2 sigma2) sum_c [ tr(M_c ZZ_c M_c^T) - 2 <M_c, YZ_c> ]
                       + lambda_L sum_c ||L_c||_*  +  lambda_S ||S||_1,

with ``M_c = L_c + S``. This is the weighted least-squares fit
``||M_c Zbar_c - YZ_c Zbar_c^{-1}||_F^2`` expanded so that neither the
square root ``Zbar_c`` of ``ZZ_c`` nor its inverse is needed; the two forms
differ by a constant whenever ``ZZ_c`` is invertible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from mixsig.errors import NumericalFailure, ParameterError


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 500
    tol: float = 1e-8
    acceleration: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class MStepProblem:
    """Quadratic data term from sufficient statistics plus the two priors.

    `stats` needs ``YZbar`` and ``ZZbar`` (lists of C matrices).
    """

    stats: object
    sigma2: float
    lambda_L: float
    lambda_S: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ParameterError(f"sigma2 must be positive, got {self.sigma2}")
        if self.lambda_L < 0 or self.lambda_S < 0:
            raise ParameterError("regularization weights must be nonnegative")
        YZ, ZZ = self.stats.YZbar, self.stats.ZZbar
        if len(YZ) != len(ZZ):
            raise ParameterError("YZbar and ZZbar must have one entry per component")
        for a, b in zip(YZ, ZZ):
            if b.shape != (a.shape[1], a.shape[1]):
                raise ParameterError(f"ZZbar block {b.shape} does not match YZbar block {a.shape}")

    @property
    def C(self) -> int:
        return len(self.stats.YZbar)

    @property
    def shape(self):
        return self.stats.YZbar[0].shape


def soft_threshold(M, tau: float) -> np.ndarray:
    """Entrywise shrinkage, the proximal map of ``tau * ||.||_1``."""
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau}")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def _svt(M, tau):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    return (U[:, :r] * s[:r]) @ Vt[:r], float(s.sum())


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding, the proximal map of ``tau * ||.||_*``."""
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau}")
    return _svt(np.asarray(M, dtype=float), tau)[0]


def nuclear_norm(M) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def smooth_objective(L: Sequence[np.ndarray], S: np.ndarray, stats, sigma2: float) -> float:
    total = 0.0
    for Lc, YZ, ZZ in zip(L, stats.YZbar, stats.ZZbar):
        M = Lc + S
        total += np.sum((M @ ZZ) * M) - 2.0 * np.sum(M * YZ)
    return total / (2.0 * sigma2)


def mstep_gradient(L: Sequence[np.ndarray], S: np.ndarray, stats, sigma2: float):
    """Gradient of the smooth term with respect to each ``L_c`` and ``S``."""
    gradL = [((Lc + S) @ ZZ - YZ) / sigma2 for Lc, YZ, ZZ in zip(L, stats.YZbar, stats.ZZbar)]
    gradS = np.sum(gradL, axis=0) if gradL else np.zeros_like(S)
    return gradL, gradS


def composite_objective(problem: MStepProblem, L, S) -> float:
    return (
        smooth_objective(L, S, problem.stats, problem.sigma2)
        + problem.lambda_L * sum(nuclear_norm(Lc) for Lc in L)
        + problem.lambda_S * float(np.abs(S).sum())
    )


def lipschitz_constant(problem: MStepProblem) -> float:
    # Hessian is (E E^T) kron ZZ_c blockwise with E = [I_C; 1^T]; lambda_max(E E^T) = 1 + C
    zmax = max(float(np.linalg.eigvalsh(ZZ)[-1]) for ZZ in problem.stats.ZZbar)
    return (1 + problem.C) * max(zmax, 0.0) / problem.sigma2


def _prox_step(problem, L, S, step):
    gL, gS = mstep_gradient(L, S, problem.stats, problem.sigma2)
    newL, nuc = [], 0.0
    for Lc, g in zip(L, gL):
        X, nrm = _svt(Lc - step * g, step * problem.lambda_L)
        newL.append(X)
        nuc += nrm
    newS = soft_threshold(S - step * gS, step * problem.lambda_S)
    F = (
        smooth_objective(newL, newS, problem.stats, problem.sigma2)
        + problem.lambda_L * nuc
        + problem.lambda_S * float(np.abs(newS).sum())
    )
    return newL, newS, F


def solve_mstep(
    problem: MStepProblem,
    init: Tuple[List[np.ndarray], np.ndarray] | None = None,
    cfg: SolverConfig = SolverConfig(),
):
    """Minimize the M-step objective by (accelerated) proximal gradient.

    Momentum is reset whenever an accelerated step would increase the
    objective, in which case a plain proximal step from the current iterate
    is taken instead; the returned trace is therefore non-increasing.

    Returns
    -------
    L : list of np.ndarray
    S : np.ndarray
    trace : list of float
        Objective after initialization and after every iteration.
    """
    n, k = problem.shape
    C = problem.C
    if init is None:
        L = [np.zeros((n, k)) for _ in range(C)]
        S = np.zeros((n, k))
    else:
        L = [np.array(Lc, dtype=float) for Lc in init[0]]
        S = np.array(init[1], dtype=float)

    lip = lipschitz_constant(problem)
    F = composite_objective(problem, L, S)
    trace = [F]
    if lip == 0:
        # no data curvature: the minimizer of the regularizers alone is zero
        L = [np.zeros((n, k)) for _ in range(C)]
        S = np.zeros((n, k))
        trace.append(composite_objective(problem, L, S))
        return L, S, trace
    step = 1.0 / lip

    yL, yS = L, S
    t = 1.0
    for _ in range(cfg.max_iter):
        newL, newS, newF = _prox_step(problem, yL, yS, step)
        if cfg.acceleration and newF > F:
            t = 1.0
            newL, newS, newF = _prox_step(problem, L, S, step)
        if not np.isfinite(newF):
            raise NumericalFailure("M-step objective became non-finite")
        if newF > F:
            # plain proximal steps cannot increase F; only rounding gets here
            newL, newS, newF = L, S, F
        if cfg.acceleration:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            yL = [a + beta * (a - b) for a, b in zip(newL, L)]
            yS = newS + beta * (newS - S)
            t = t_next
        else:
            yL, yS = newL, newS
        done = abs(F - newF) <= cfg.tol * max(1.0, abs(F))
        L, S, F = newL, newS, newF
        trace.append(F)
        if done:
            break
    return L, S, trace


def kkt_residual(problem: MStepProblem, L, S) -> float:
    """Norm of the proximal-gradient mapping at ``(L, S)``, relative to step 1/Lip.

    Zero exactly at minimizers.
    """
    lip = lipschitz_constant(problem)
    if lip == 0:
        return 0.0
    newL, newS, _ = _prox_step(problem, L, S, 1.0 / lip)
    sq = sum(np.sum((a - b) ** 2) for a, b in zip(newL, L)) + np.sum((newS - S) ** 2)
    return float(lip * np.sqrt(sq))
