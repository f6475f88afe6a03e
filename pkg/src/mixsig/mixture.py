"""Synthetic mixtures of filtered graph signals."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from mixsig.errors import ParameterError
from mixsig.filters import FilterSpec, apply_filter
from mixsig.graphs import Graph


@dataclass(frozen=True)
class ExcitationBasis:
    B: np.ndarray
    density: float

    @property
    def shape(self):
        return self.B.shape


@dataclass(frozen=True)
class Truth:
    """Generating quantities kept for evaluation only."""

    graphs: tuple
    filter: FilterSpec
    B: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Observed signals ``Y`` (n x m), excitations ``Z`` (k x m) and labels.

    ``true_w`` holds zero-based graph indices in ``range(C)``.
    """

    Y: np.ndarray
    Z: np.ndarray
    true_w: np.ndarray
    sigma2: float
    truth: Optional[Truth] = None

    def __post_init__(self):
        if self.Y.shape[1] != self.Z.shape[1] or self.true_w.shape != (self.Y.shape[1],):
            raise ParameterError(
                f"inconsistent sample counts: Y {self.Y.shape}, Z {self.Z.shape}, w {self.true_w.shape}"
            )

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    def to_csv(self, outdir) -> None:
        """Write ``Y.csv``, ``Z.csv`` and ``w.csv`` (labels one-based) into `outdir`."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        np.savetxt(outdir / "Y.csv", self.Y, delimiter=",", fmt="%.17g")
        np.savetxt(outdir / "Z.csv", self.Z, delimiter=",", fmt="%.17g")
        np.savetxt(outdir / "w.csv", self.true_w + 1, fmt="%d")


def _sparse_uniform(shape, density, rng):
    if not 0.0 <= density <= 1.0:
        raise ParameterError(f"density must lie in [0, 1], got {density}")
    mask = rng.random(shape) < density
    vals = rng.uniform(0.1, 1.0, size=shape)
    return mask * vals


def generate_basis(n: int, k: int, density: float, rng: np.random.Generator) -> ExcitationBasis:
    """Sparse n x k excitation basis: Bernoulli(density) mask times U[0.1, 1] values."""
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= n, got k={k}, n={n}")
    return ExcitationBasis(_sparse_uniform((n, k), density, rng), float(density))


def generate_excitations(k: int, m: int, density: float, rng: np.random.Generator) -> np.ndarray:
    if k < 1 or m < 1:
        raise ParameterError(f"k and m must be positive, got k={k}, m={m}")
    return _sparse_uniform((k, m), density, rng)


def sample_dataset(
    graphs: Sequence[Graph],
    spec: FilterSpec,
    B,
    Z: np.ndarray,
    P,
    sigma2: float,
    rng: np.random.Generator,
) -> Dataset:
    """Draw one observation per column of `Z` from the graph-signal mixture.

    Each sample picks graph ``c`` with probability ``P[c]`` and returns
    ``H(A_c) B z + e`` with ``e ~ N(0, sigma2 I)``.
    """
    if isinstance(B, ExcitationBasis):
        B = B.B
    B = np.asarray(B, dtype=float)
    Z = np.asarray(Z, dtype=float)
    P = np.asarray(P, dtype=float)
    C = len(graphs)
    if P.shape != (C,) or np.any(P < 0) or abs(P.sum() - 1.0) > 1e-12:
        raise ParameterError(f"P must be a length-{C} probability vector, got {P}")
    if sigma2 < 0:
        raise ParameterError(f"sigma2 must be nonnegative, got {sigma2}")
    if B.shape[1] != Z.shape[0]:
        raise ParameterError(f"B is {B.shape} but Z has {Z.shape[0]} rows")

    n, m = B.shape[0], Z.shape[1]
    w = rng.choice(C, size=m, p=P)
    Y = np.empty((n, m))
    for c, g in enumerate(graphs):
        idx = np.flatnonzero(w == c)
        if idx.size:
            HB = apply_filter(spec, g).matrix @ B
            Y[:, idx] = HB @ Z[:, idx]
    Y += np.sqrt(sigma2) * rng.standard_normal((n, m))
    return Dataset(Y, Z, w, float(sigma2), Truth(tuple(graphs), spec, B))
