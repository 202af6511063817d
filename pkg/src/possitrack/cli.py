"""Command line front end for the benchmark.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
Log verbosity is controlled by the POSSITRACK_LOG environment variable
(DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from .bench import (
    BenchResult,
    demo_config,
    emit_results,
    load_config,
    run_benchmark,
)
from .mixtures import NumericalError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Paired Monte Carlo benchmark of the possibility filter against the probabilistic baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the benchmark from a JSON configuration file")
    run_p.add_argument("--config", required=True, help="flat JSON configuration file")
    run_p.add_argument("--lambda", dest="lambdas", type=float, nargs="+", metavar="RATE",
                       help="override the false-positive rates")
    run_p.add_argument("--runs", type=int, help="override the number of Monte Carlo runs")
    run_p.add_argument("--seed", type=int, help="override the base seed")
    run_p.add_argument("--out", default="bench_out", help="output directory (default: bench_out)")

    demo_p = sub.add_parser("demo", help="run a small pinned deterministic configuration")
    demo_p.add_argument("--out", default="bench_out", help="output directory (default: bench_out)")
    return parser


def _print_report(result: BenchResult, paths) -> None:
    cfg = result.config
    print(f"tracking benchmark: {cfg.n_runs} runs, seed {cfg.base_seed}, "
          f"miss cost c_err = {cfg.c_err:g} m")
    print(f"{'filter':<10} {'lambda':>7} {'threshold':>10} {'avg_error':>12}")
    for name, lam, tau, avg, *_ in result.summary:
        print(f"{name:<10} {lam:>7g} {tau:>10g} {avg:>12.4f}")
    for p in paths:
        print(f"wrote {p}")


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("POSSITRACK_LOG", "WARNING").upper())
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "demo":
            cfg = demo_config()
        else:
            cfg = load_config(args.config)
            if args.lambdas is not None:
                cfg = replace(cfg, lambda_list=tuple(args.lambdas))
            if args.runs is not None:
                cfg = replace(cfg, n_runs=args.runs)
            if args.seed is not None:
                cfg = replace(cfg, base_seed=args.seed)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1

    try:
        result = run_benchmark(cfg)
        paths = emit_results(result, args.out)
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1

    _print_report(result, paths)
    return 0


if __name__ == "__main__":
    sys.exit(main())
