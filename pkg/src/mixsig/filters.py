"""Polynomial and resolvent graph filters and the multi-graph low-pass ratio."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mixsig.errors import (
    AssumptionError,
    DegenerateFilterError,
    DomainError,
    FilterInstabilityError,
    ParameterError,
)
from mixsig.graphs import Graph

GRID_POINTS = 1000


@dataclass(frozen=True)
class FilterSpec:
    """Scalar frequency response of a graph filter.

    ``kind="resolvent"`` gives ``h(x) = 1 / (1 - alpha x)``;
    ``kind="polynomial"`` gives ``h(x) = sum_t coeffs[t] x**t``.
    A nonzero ``shift`` subtracts a constant, ``h(x) - shift``, which is how
    boosted filters ``H - rho I`` are represented.
    """

    kind: str
    alpha: float = 0.0
    coeffs: tuple = ()
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("resolvent", "polynomial"):
            raise ParameterError(f"unknown filter kind {self.kind!r}")
        if self.kind == "polynomial":
            if len(self.coeffs) == 0:
                raise ParameterError("polynomial filter needs at least one coefficient")
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def resolvent(cls, alpha: float) -> "FilterSpec":
        return cls("resolvent", alpha=float(alpha))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "FilterSpec":
        return cls("polynomial", coeffs=tuple(coeffs))

    def shifted(self, rho: float) -> "FilterSpec":
        return FilterSpec(self.kind, self.alpha, self.coeffs, self.shift + float(rho))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "resolvent":
            d["alpha"] = self.alpha
        else:
            d["coeffs"] = list(self.coeffs)
        if self.shift:
            d["shift"] = self.shift
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        kind = d.get("kind")
        if kind == "resolvent":
            if "alpha" not in d:
                raise ParameterError("resolvent filter requires 'alpha'")
            return cls("resolvent", alpha=float(d["alpha"]), shift=float(d.get("shift", 0.0)))
        if kind == "polynomial":
            return cls("polynomial", coeffs=tuple(d.get("coeffs", ())), shift=float(d.get("shift", 0.0)))
        raise ParameterError(f"unknown filter kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FilterMatrix:
    matrix: np.ndarray
    spec: FilterSpec
    graph: Graph = field(repr=False)


def frequency_response(spec: FilterSpec, lam):
    """Evaluate ``h(lam)``; works elementwise on arrays."""
    lam = np.asarray(lam, dtype=float)
    if spec.kind == "resolvent":
        denom = 1.0 - spec.alpha * lam
        if np.any(denom == 0):
            raise DomainError(f"resolvent pole at lambda = {1.0 / spec.alpha}")
        out = 1.0 / denom
    else:
        out = np.zeros_like(lam)
        for c in reversed(spec.coeffs):
            out = out * lam + c
    out = out - spec.shift
    return float(out) if out.ndim == 0 else out


def apply_filter(spec: FilterSpec, g: Graph) -> FilterMatrix:
    """Form the n x n filter matrix ``H(A)`` of graph `g`."""
    A = g.adjacency
    n = g.n
    eye = np.eye(n)
    if spec.kind == "resolvent":
        lam = g.spectrum.eigenvalues
        if np.any(spec.alpha * lam >= 1.0):
            raise FilterInstabilityError(
                f"alpha * lambda_max = {spec.alpha * lam.max():.4g} >= 1, resolvent undefined"
            )
        H = np.linalg.solve(eye - spec.alpha * A, eye)
        H = 0.5 * (H + H.T)
    else:
        H = np.zeros((n, n))
        for c in reversed(spec.coeffs):
            H = H @ A + c * eye
    if spec.shift:
        H = H - spec.shift * eye
    return FilterMatrix(H, spec, g)


def boosted_filter(fm: FilterMatrix, rho: float = 1.0) -> FilterMatrix:
    """Return ``H(A) - rho I`` as a new filter matrix."""
    if rho < 0:
        raise ParameterError(f"rho must be nonnegative, got {rho}")
    n = fm.matrix.shape[0]
    return FilterMatrix(fm.matrix - rho * np.eye(n), fm.spec.shifted(rho), fm.graph)


def _abs_extrema(spec: FilterSpec, lo: float, hi: float, eigs: np.ndarray):
    """Min and max of ``|h|`` over the closed interval ``[lo, hi]``."""
    if spec.kind == "resolvent":
        if spec.alpha != 0 and lo <= 1.0 / spec.alpha <= hi:
            raise FilterInstabilityError("resolvent pole inside the spectral interval")
        # h is monotone on pole-free intervals, so |h| peaks at an endpoint and
        # bottoms out at an endpoint unless h changes sign inside.
        ha, hb = frequency_response(spec, np.array([lo, hi]))
        vmax = max(abs(ha), abs(hb))
        vmin = 0.0 if ha * hb < 0 else min(abs(ha), abs(hb))
        return vmin, vmax
    pts = np.linspace(lo, hi, GRID_POINTS)
    pts = np.concatenate([pts, eigs[(eigs >= lo) & (eigs <= hi)]])
    h = frequency_response(spec, pts)
    vmin = float(np.min(np.abs(h)))
    if np.any(np.sign(h[:GRID_POINTS - 1]) * np.sign(h[1:GRID_POINTS]) < 0):
        vmin = 0.0
    return vmin, float(np.max(np.abs(h)))


def spectral_bounds(graphs: Sequence[Graph]) -> dict:
    """Extreme eigenvalues over a graph set (min/max of lambda_1, max lambda_2, min lambda_n)."""
    spectra = [g.spectrum.eigenvalues for g in graphs]
    return {
        "lam1_min": min(s[0] for s in spectra),
        "lam1_max": max(s[0] for s in spectra),
        "lam2_max": max(s[1] if s.size > 1 else -np.inf for s in spectra),
        "lamn_min": min(s[-1] for s in spectra),
    }


def low_pass_ratio(spec: FilterSpec, graphs) -> float:
    """Worst stopband response over weakest passband response across graphs.

    Values below one mean every filter in the set is low pass. Accepts a single
    graph or a sequence of graphs.
    """
    if isinstance(graphs, Graph):
        graphs = [graphs]
    if len(graphs) == 0:
        raise ParameterError("need at least one graph")
    b = spectral_bounds(graphs)
    eigs = np.concatenate([g.spectrum.eigenvalues for g in graphs])
    return ratio_from_bounds(spec, eigs=eigs, **b)


def ratio_from_bounds(spec, lam1_min, lam1_max, lam2_max, lamn_min, eigs=None) -> float:
    """Low-pass ratio from precomputed spectral extremes."""
    if not lam1_min > lam2_max:
        raise AssumptionError(
            f"min lambda_1 = {lam1_min:.6g} does not exceed max lambda_2 = {lam2_max:.6g}"
        )
    eigs = np.empty(0) if eigs is None else np.asarray(eigs, dtype=float)
    pass_min, _ = _abs_extrema(spec, lam1_min, lam1_max, eigs)
    if pass_min == 0:
        raise DegenerateFilterError("filter response vanishes in the passband")
    _, stop_max = _abs_extrema(spec, lamn_min, lam2_max, eigs)
    return stop_max / pass_min
