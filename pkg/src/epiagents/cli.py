"""Command-line front end.

    epiagents metrics cycle:n=50 --eta 1,2,5
    epiagents simulate config.yaml --n 100
    epiagents sweep config.yaml
    epiagents bounds beta=0.1 d_max=4 mu=1 n=100
    epiagents classify graph=complete:n=30 beta=0.02 kind=linear_scaling gamma=0.9 alpha=0.5
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .chains import lower_bound_report, regime_classify, upper_bound_report
from .epidemics import outcomes_to_csv, simulate_batch
from .experiment import ExperimentIOError, load_config, run_experiment
from .graphs import NotConvergedError, compute_metrics, parse_generator_spec
from .strategies import StrategySpec

log = logging.getLogger("epiagents")


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _key_values(tokens: list[str]) -> dict:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        out[key.strip()] = value.strip()
    return out


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def cmd_metrics(args) -> int:
    g = parse_generator_spec(args.graph)
    sizes = [int(s) for s in args.eta.split(",")] if args.eta else []
    m = compute_metrics(g, eta_sizes=sizes, tolerance=args.tolerance, eta_mode=args.eta_mode)
    _dump({"node_count": g.node_count, "edge_count": g.edge_count, **m.to_dict()})
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    points = cfg.points()
    n = args.n if args.n is not None else points[0]
    if cfg.sweep and n not in cfg.sweep:
        raise ValueError(f"--n {n} is not in the sweep {cfg.sweep}")
    outcomes = simulate_batch(cfg.graph_at(n), cfg.model, cfg.beta_at(n), cfg.strategy_spec(),
                              cfg.initial_rule(), cfg.replications, base_seed=cfg.base_seed,
                              horizon=cfg.horizon, max_events=cfg.max_events, workers=cfg.workers)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            outcomes_to_csv(outcomes, fh)
    else:
        outcomes_to_csv(outcomes, sys.stdout)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.raw_csv:
        cfg.raw_csv = args.raw_csv
    if args.summary_json:
        cfg.summary_json = args.summary_json
    try:
        report = run_experiment(cfg)
    except ExperimentIOError as exc:
        log.error("%s", exc)
        sys.stdout.write(exc.report.to_json() + "\n")
        return 3
    if not cfg.summary_json:
        sys.stdout.write(report.to_json() + "\n")
    log.info("verdict: %s", report.verdict)
    return 0


def cmd_bounds(args) -> int:
    kv = _key_values(args.params)
    chain = kv.pop("chain", "upper")
    vals = {k: _number(v) for k, v in kv.items()}
    if chain == "upper":
        _dump(upper_bound_report(float(vals["beta"]), float(vals["d_max"]), float(vals.get("mu", 0.0)),
                                 int(vals["n"])))
    elif chain == "lower":
        # eta is a caller-certified lower bound valid for every set size up to n**alpha
        n, alpha = int(vals["n"]), float(vals["alpha"])
        m = math.floor(n ** alpha)
        eta = [0.0] + [float(vals["eta"])] * m
        _dump(lower_bound_report(float(vals["beta"]), eta, float(vals["gamma"]), alpha, n))
    else:
        raise ValueError(f"chain must be 'upper' or 'lower', got {chain!r}")
    return 0


def cmd_classify(args) -> int:
    kv = _key_values(args.params)
    g = parse_generator_spec(kv.pop("graph"))
    beta = float(kv.pop("beta"))
    strategy = StrategySpec.from_dict({k: (v if k == "kind" else _number(v)) for k, v in kv.items()})
    sizes = []
    if not strategy.constant_budget:
        sizes = [math.floor(g.node_count ** strategy.alpha)]
        sizes = [m for m in sizes if 1 <= m < g.node_count]
    m = compute_metrics(g, eta_sizes=sizes)
    verdict = regime_classify(beta, m, strategy)
    _dump({"parameters": {"beta": beta, "strategy": strategy.to_dict()}, "metrics": m.to_dict(),
           **verdict.to_dict()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epiagents", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("metrics", help="degree, spectral and isoperimetric metrics of a graph")
    s.add_argument("graph", help="edge-list file or generator spec such as 'star:leaves=10'")
    s.add_argument("--eta", help="comma-separated set sizes m for eta(m)")
    s.add_argument("--eta-mode", default="auto", choices=["auto", "exact", "sampled"])
    s.add_argument("--tolerance", type=float, default=1e-10)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("simulate", help="one batch of runs from a config; CSV out")
    s.add_argument("config")
    s.add_argument("--n", type=int, help="sweep value to run (default: the first)")
    s.add_argument("-o", "--output", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="full n-sweep with summary and growth fit")
    s.add_argument("config")
    s.add_argument("--raw-csv")
    s.add_argument("--summary-json")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bounds", help="analytic extinction-time bounds from birth-death chains")
    s.add_argument("params", nargs="+", help="key=value: chain=upper|lower beta d_max mu n | gamma alpha eta")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("classify", help="regime of (graph, beta, strategy)")
    s.add_argument("params", nargs="+", help="key=value: graph beta kind mu gamma alpha ...")
    s.set_defaults(func=cmd_classify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, NotConvergedError, FileNotFoundError) as exc:
        msg = f"missing parameter {exc}" if isinstance(exc, KeyError) else str(exc)
        log.error("%s", msg)
        return 2


if __name__ == "__main__":
    sys.exit(main())
