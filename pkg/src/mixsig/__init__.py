"""Joint clustering and eigen-centrality estimation for mixtures of filtered graph signals."""

from mixsig.em import EMConfig, EMResult, SuffStats, Theta, run_em
from mixsig.filters import FilterSpec, apply_filter, low_pass_ratio
from mixsig.graphs import Graph, eigen_centrality, generate_cp_graph
from mixsig.metrics import centrality_error_rate, nmi
from mixsig.mixture import Dataset, generate_basis, generate_excitations, sample_dataset
from mixsig.solver import SolverConfig

__all__ = [
    "Dataset",
    "EMConfig",
    "EMResult",
    "FilterSpec",
    "Graph",
    "SolverConfig",
    "SuffStats",
    "Theta",
    "apply_filter",
    "centrality_error_rate",
    "eigen_centrality",
    "generate_basis",
    "generate_cp_graph",
    "generate_excitations",
    "low_pass_ratio",
    "nmi",
    "run_em",
    "sample_dataset",
]

__version__ = "0.1.0"
