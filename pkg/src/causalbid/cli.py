"""Command line interface: seeded simulations and verification suites."""

from __future__ import annotations

import argparse
import sys

from .harness import aggregate, emit, load_config, run_experiment
from .verify import SUITES, run_suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="causalbid",
        description="Online causal bidding in repeated second-price auctions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded experiment from a JSON config")
    sim.add_argument("--config", required=True, help="path to the JSON experiment config")
    sim.add_argument("--runs", type=int, default=None, help="override the number of runs")
    sim.add_argument("--seed", type=int, default=None, help="override the base seed")
    sim.add_argument("--out", default=None, help="override the output directory")
    sim.add_argument("--plot", action="store_true", default=None,
                     help="also render regret.svg")
    sim.add_argument("--workers", type=int, default=None,
                     help="parallel worker processes (results identical regardless)")

    ver = sub.add_parser("verify", help="run a named verification suite")
    ver.add_argument("--suite", required=True, choices=sorted(SUITES))
    ver.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "simulate":
        config = load_config(
            args.config, runs=args.runs, seed=args.seed,
            out_dir=args.out, plot=args.plot, workers=args.workers,
        )
        streams = run_experiment(config)
        summary = {policy: aggregate(runs) for policy, runs in streams.items()}
        paths = emit(summary, streams, config)
        for policy, agg in summary.items():
            print(f"{policy}: final regret mean={agg['mean_cum_regret'][-1]:.4f} "
                  f"std={agg['std_cum_regret'][-1]:.4f} over {agg['runs']} runs")
        print(f"wrote {len(paths)} files to {config.out_dir}")
        return 0

    report = run_suite(args.suite, seed=args.seed)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
