"""Command-line entry point: ``mixsig {experiment,generate,fit,metrics}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from mixsig.em import run_em
from mixsig.errors import ConfigError, MixsigError
from mixsig.experiment import (
    ExperimentConfig,
    default_threads,
    exceeds_failure_budget,
    generate_trial,
    run_experiment,
)
from mixsig.metrics import centrality_error_rate, nmi

EXIT_OK, EXIT_CONFIG, EXIT_TRIALS = 0, 1, 2


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(d)
    return cfg


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    if args.timing:
        cfg.timing = True
    threads = args.threads if args.threads is not None else default_threads()
    outcome = run_experiment(cfg, args.out, threads=threads)
    for line in Path(args.out, "summary.csv").read_text().splitlines():
        print(line)
    if outcome.failures:
        print(f"{len(outcome.failures)}/{outcome.n_trials} trials failed", file=sys.stderr)
    return EXIT_TRIALS if exceeds_failure_budget(outcome) else EXIT_OK


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    C = args.C if args.C is not None else cfg.C_values[0]
    graphs, ds = generate_trial(cfg, C, args.trial)
    out = Path(args.out)
    ds.to_csv(out)
    for c, g in enumerate(graphs, start=1):
        g.to_csv(out / f"A_{c}.csv")
    with open(out / "cores.json", "w") as f:
        json.dump([sorted(g.core_set) for g in graphs], f)
    print(f"wrote n={ds.Y.shape[0]} m={ds.m} C={C} dataset to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    Y = np.loadtxt(args.Y, delimiter=",", ndmin=2)
    Z = np.loadtxt(args.Z, delimiter=",", ndmin=2)
    if args.sigma2 is not None:
        cfg.sigma2 = args.sigma2
    res = run_em(Y, Z, args.C, cfg.em_config(args.init), np.random.default_rng(cfg.seed))
    res.save(args.out, matrices=args.matrices)
    print(f"wrote {Path(args.out) / 'result.json'}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    out = {}
    if args.labels:
        a = np.loadtxt(args.labels[0], dtype=int, ndmin=1)
        b = np.loadtxt(args.labels[1], dtype=int, ndmin=1)
        out["nmi"] = nmi(a, b)
    if args.result and args.cores:
        res = json.loads(Path(args.result).read_text())
        cores = [set(c) for c in json.loads(Path(args.cores).read_text())]
        cents = [np.asarray(c) for c in res["centralities"]]
        out["error_rate"] = centrality_error_rate(cents, cores, args.top_k)
    if not out:
        print("nothing to evaluate: pass --labels and/or --result with --cores", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixsig", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", aliases=["run"], help="Monte-Carlo sweep over C and trials")
    e.add_argument("--config", help="JSON experiment config")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--threads", type=int, help="worker processes (default $MIXSIG_THREADS or 1)")
    e.add_argument("--seed", type=int, help="overrides the config seed")
    e.add_argument("--timing", action="store_true", help="fill the seconds column (breaks byte-identical output)")
    e.set_defaults(func=cmd_experiment)

    g = sub.add_parser("generate", help="write one synthetic dataset as CSV")
    g.add_argument("--config")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--C", type=int, help="number of graphs (default: first of C_values)")
    g.add_argument("--trial", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run EM on Y/Z CSV files")
    f.add_argument("--Y", required=True)
    f.add_argument("--Z", required=True)
    f.add_argument("--C", type=int, required=True)
    f.add_argument("--config")
    f.add_argument("--seed", type=int)
    f.add_argument("--sigma2", type=float)
    f.add_argument("--init", choices=["spectral", "random"], default="spectral")
    f.add_argument("--out", required=True)
    f.add_argument("--matrices", action="store_true", help="also write L_c and S as CSV")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("metrics", help="NMI and centrality error rate from files")
    m.add_argument("--labels", nargs=2, metavar=("TRUE", "EST"), help="two single-column label files")
    m.add_argument("--result", help="result.json from `fit`")
    m.add_argument("--cores", help="cores.json from `generate`")
    m.add_argument("--top-k", type=int, default=10)
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MixsigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
