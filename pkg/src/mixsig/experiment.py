"""Seeded Monte-Carlo runner for the clustering / centrality experiments."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from mixsig.em import EMConfig, extract_centralities, m_step, run_em, sufficient_stats
from mixsig.errors import ConfigError
from mixsig.filters import FilterSpec
from mixsig.graphs import generate_cp_graph
from mixsig.metrics import centrality_error_rate, nmi
from mixsig.mixture import generate_basis, generate_excitations, sample_dataset
from mixsig.solver import SolverConfig
from mixsig.spectral import spectral_clustering

log = logging.getLogger(__name__)

METHODS = ("em_spectral", "em_random", "sc_only")
CSV_COLUMNS = ("method", "C", "trial", "nmi", "error_rate", "seconds", "iterations")
MAX_SHARED_CORE = 9
FAILURE_FRACTION = 0.10


@dataclass
class ExperimentConfig:
    seed: int = 0
    n: int = 100
    C_values: List[int] = field(default_factory=lambda: [2])
    m_per_graph: int = 200
    trials: int = 20
    filter: FilterSpec = field(default_factory=lambda: FilterSpec.resolvent(1 / 40))
    k: int = 40
    b_density: float = 0.1
    z_density: float = 0.6
    sigma2: float = 0.01
    lambda_L: float = 1.0
    lambda_S: float = 0.1
    T_max: int = 100
    solver: SolverConfig = field(default_factory=SolverConfig)
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    core_size: int = 10
    p_core_periph: float = 0.2
    p_periph: float = 0.05
    trace_C: Optional[int] = None
    trace_trial: int = 0
    timing: bool = False

    def __post_init__(self):
        problems = []
        for name in ("n", "m_per_graph", "trials", "k", "T_max", "core_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                problems.append(f"{name}: expected a positive integer, got {v!r}")
        if not self.C_values or any(not isinstance(c, int) or c < 1 for c in self.C_values):
            problems.append(f"C_values: expected a nonempty list of positive integers, got {self.C_values!r}")
        for name in ("b_density", "z_density", "p_core_periph", "p_periph"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0 <= v <= 1:
                problems.append(f"{name}: expected a number in [0, 1], got {v!r}")
        if not isinstance(self.sigma2, (int, float)) or not self.sigma2 > 0:
            problems.append(f"sigma2: expected a positive number, got {self.sigma2!r}")
        for name in ("lambda_L", "lambda_S"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or v < 0:
                problems.append(f"{name}: expected a nonnegative number, got {v!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            problems.append(f"methods: unknown or empty {bad or self.methods!r}; choose from {list(METHODS)}")
        if isinstance(self.k, int) and isinstance(self.n, int) and self.k > self.n:
            problems.append(f"k: must not exceed n={self.n}, got {self.k}")
        if isinstance(self.core_size, int) and isinstance(self.n, int) and self.core_size > self.n:
            problems.append(f"core_size: must not exceed n={self.n}, got {self.core_size}")
        if problems:
            raise ConfigError("invalid experiment config:\n  " + "\n  ".join(problems))
        if self.trace_C is None:
            self.trace_C = self.C_values[0]

    def em_config(self, init) -> EMConfig:
        return EMConfig(
            sigma2=self.sigma2,
            T_max=self.T_max,
            lambda_L=self.lambda_L,
            lambda_S=self.lambda_S,
            solver=self.solver,
            init=init,
        )

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["filter"] = self.filter.to_dict()
        d["solver"] = asdict(self.solver)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        d = dict(d)
        try:
            if "filter" in d:
                d["filter"] = FilterSpec.from_dict(d["filter"])
            if "solver" in d:
                d["solver"] = SolverConfig(**d["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid filter/solver section: {exc}") from exc
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(d)


def trial_seed(seed: int, C: int, trial: int) -> np.random.SeedSequence:
    # keyed on (C, trial) so that subsetting C_values leaves other trials unchanged
    return np.random.SeedSequence(entropy=seed, spawn_key=(C, trial))


def _method_rng(ss: np.random.SeedSequence, method: str) -> np.random.Generator:
    child = np.random.SeedSequence(entropy=ss.entropy, spawn_key=ss.spawn_key + (1 + METHODS.index(method),))
    return np.random.default_rng(child)


def generate_trial(cfg: ExperimentConfig, C: int, trial: int):
    """Graphs and dataset for one Monte-Carlo trial."""
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=cfg.seed, spawn_key=(C, trial, 0)))
    graphs = []
    while len(graphs) < C:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            g = generate_cp_graph(cfg.n, cfg.core_size, cfg.p_core_periph, cfg.p_periph, rng)
        for w in caught:
            log.debug("C=%d trial=%d: %s", C, trial, w.message)
        limit = min(MAX_SHARED_CORE, cfg.core_size)
        if cfg.core_size > 1 and any(len(g.core_set & h.core_set) >= limit for h in graphs):
            continue
        graphs.append(g)
    B = generate_basis(cfg.n, cfg.k, cfg.b_density, rng)
    Z = generate_excitations(cfg.k, cfg.m_per_graph * C, cfg.z_density, rng)
    ds = sample_dataset(graphs, cfg.filter, B, Z, np.full(C, 1.0 / C), cfg.sigma2, rng)
    return graphs, ds


def sc_only(Y, Z, C, cfg: ExperimentConfig, rng):
    """Spectral-clustering labels plus one M-step on the resulting hard assignment."""
    labels, _, _ = spectral_clustering(Y, C, rng)
    W = np.zeros((Y.shape[1], C))
    W[np.arange(Y.shape[1]), labels] = 1.0
    theta = m_step(sufficient_stats(W, Y, Z), cfg.em_config("spectral"))
    return labels, extract_centralities(theta)


def run_trial(cfg: ExperimentConfig, C: int, trial: int):
    """Run every requested method on one trial.

    Returns per-method rows and the per-iteration NMI of each EM method.
    """
    graphs, ds = generate_trial(cfg, C, trial)
    cores = [g.core_set for g in graphs]
    ss = trial_seed(cfg.seed, C, trial)
    rows, traces = [], {}
    for method in cfg.methods:
        rng = _method_rng(ss, method)
        t0 = time.perf_counter()
        if method == "sc_only":
            labels, cents = sc_only(ds.Y, ds.Z, C, cfg, rng)
            iters = 1
        else:
            init = "spectral" if method == "em_spectral" else "random"
            res = run_em(ds.Y, ds.Z, C, cfg.em_config(init), rng)
            labels, cents, iters = res.w_hat, res.centralities, len(res.objective_trace)
            traces[method] = [nmi(lab, ds.true_w) for lab in res.label_trace]
        seconds = time.perf_counter() - t0
        rows.append({
            "method": method,
            "C": C,
            "trial": trial,
            "nmi": nmi(labels, ds.true_w),
            "error_rate": centrality_error_rate(cents, cores, cfg.core_size),
            "seconds": seconds if cfg.timing else "",
            "iterations": iters,
        })
    return rows, traces


def _safe_trial(args):
    cfg, C, trial = args
    try:
        rows, traces = run_trial(cfg, C, trial)
        return C, trial, rows, traces, None
    except Exception:  # recorded and skipped per trial
        return C, trial, [], {}, traceback.format_exc()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def aggregate(rows) -> list:
    """Mean and sample standard deviation of each metric per (method, C)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["C"]), []).append(r)
    out = []
    for (method, C) in sorted(groups, key=lambda k: (METHODS.index(k[0]), k[1])):
        g = groups[(method, C)]
        rec = {"method": method, "C": C, "trials": len(g)}
        for metric in ("nmi", "error_rate"):
            vals = np.array([r[metric] for r in g], dtype=float)
            rec[f"{metric}_mean"] = float(vals.mean())
            rec[f"{metric}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(rec)
    return out


def emit_plot_data(rows, traces=None) -> dict:
    """Plot-ready series: one per (method, metric) against C, plus NMI traces.

    Bands are mean +/- sample standard deviation.
    """
    if not rows:
        raise ValueError("no results to plot")
    series = []
    agg = aggregate(rows)
    for method in METHODS:
        recs = [a for a in agg if a["method"] == method]
        if not recs:
            continue
        for metric in ("nmi", "error_rate"):
            y = [a[f"{metric}_mean"] for a in recs]
            s = [a[f"{metric}_std"] for a in recs]
            series.append({
                "method": method,
                "metric": metric,
                "x_label": "C",
                "x": [a["C"] for a in recs],
                "y": y,
                "y_lo": [m - d for m, d in zip(y, s)],
                "y_hi": [m + d for m, d in zip(y, s)],
            })
    for method, tr in sorted((traces or {}).items()):
        series.append({
            "method": method,
            "metric": "nmi_trace",
            "x_label": "iteration",
            "x": list(range(1, len(tr) + 1)),
            "y": list(tr),
            "y_lo": list(tr),
            "y_hi": list(tr),
        })
    return {"series": series}


@dataclass
class ExperimentOutcome:
    rows: list
    traces: dict
    failures: list
    n_trials: int
    all_traces: dict = field(default_factory=dict, repr=False)

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / self.n_trials if self.n_trials else 0.0


def run_experiment(cfg: ExperimentConfig, outdir=None, threads: int = 1) -> ExperimentOutcome:
    """Run all (C, trial) pairs and optionally write result files to `outdir`.

    Files: ``trials.csv``, ``summary.csv``, ``nmi_trace.csv``,
    ``plot_data.json``, ``config.json`` and, if any trial failed,
    ``failures.txt``.
    """
    jobs = [(cfg, C, t) for C in cfg.C_values for t in range(cfg.trials)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_safe_trial, jobs))
    else:
        results = [_safe_trial(j) for j in jobs]
    results.sort(key=lambda r: (r[0], r[1]))

    rows, all_traces, failures = [], {}, []
    for C, trial, r, tr, err in results:
        if err is not None:
            log.warning("trial (C=%d, trial=%d) failed:\n%s", C, trial, err)
            failures.append((C, trial, err))
            continue
        rows.extend(r)
        all_traces[(C, trial)] = tr
    rows.sort(key=lambda r: (r["C"], r["trial"], METHODS.index(r["method"])))
    traces = all_traces.get((cfg.trace_C, cfg.trace_trial), {})
    outcome = ExperimentOutcome(rows, traces, failures, len(jobs), all_traces)
    if outdir is not None:
        write_outputs(cfg, outcome, outdir)
    return outcome


def write_outputs(cfg: ExperimentConfig, outcome: ExperimentOutcome, outdir) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "trials.csv").write_text(rows_to_csv(outcome.rows))
    agg = aggregate(outcome.rows) if outcome.rows else []
    cols = ("method", "C", "trials", "nmi_mean", "nmi_std", "error_rate_mean", "error_rate_std")
    (outdir / "summary.csv").write_text(rows_to_csv(agg, cols))
    trace_rows = [
        {"method": m, "iteration": i + 1, "nmi": v}
        for m in sorted(outcome.traces)
        for i, v in enumerate(outcome.traces[m])
    ]
    (outdir / "nmi_trace.csv").write_text(rows_to_csv(trace_rows, ("method", "iteration", "nmi")))
    if outcome.rows:
        with open(outdir / "plot_data.json", "w") as f:
            json.dump(emit_plot_data(outcome.rows, outcome.traces), f, indent=2)
    with open(outdir / "config.json", "w") as f:
        json.dump(cfg.to_dict(), f, indent=2)
    if outcome.failures:
        with open(outdir / "failures.txt", "w") as f:
            for C, trial, err in outcome.failures:
                f.write(f"C={C} trial={trial}\n{err}\n")


def default_threads() -> int:
    env = os.environ.get("MIXSIG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer MIXSIG_THREADS=%r", env)
    return 1


def exceeds_failure_budget(outcome: ExperimentOutcome) -> bool:
    return outcome.failure_fraction > FAILURE_FRACTION and not math.isclose(
        outcome.failure_fraction, FAILURE_FRACTION)
