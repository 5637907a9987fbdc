"""Command-line entry point: ``pigrad run <id>`` and ``pigrad check <id>``."""

import argparse
import logging
import sys

from .experiments import EXPERIMENTS, SUMMARY_COLUMNS, ExperimentConfig, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(prog="pigrad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment and write CSV artifacts")
    run.add_argument("experiment", choices=EXPERIMENTS)
    for name in ("alpha", "k", "gamma", "beta", "sigma", "dt", "T"):
        run.add_argument(f"--{name}", type=float, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--method", choices=("euler", "rk4"), default="euler")
    run.add_argument("--out", default="runs")
    check = sub.add_parser("check", help="run with defaults; exit 0 iff all checks pass")
    check.add_argument("experiment", choices=EXPERIMENTS)
    check.add_argument("--out", default="runs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        cfg = ExperimentConfig(
            experiment=args.experiment, alpha=args.alpha, k=args.k, gamma=args.gamma,
            beta=args.beta, sigma=args.sigma, dt=args.dt, T=args.T, seed=args.seed,
            method=args.method, out=args.out)
    else:
        cfg = ExperimentConfig(experiment=args.experiment, out=args.out)
    result = run_experiment(cfg)
    for c in SUMMARY_COLUMNS:
        print(f"{c}: {result.summary.get(c)}")
    for c in result.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name} = {c.value:.6g} (limit {c.threshold:g})")
    for note in result.notes:
        print(f"note: {note}")
    for kind, path in result.paths.items():
        print(f"wrote {kind}: {path}")
    code = result.summary["exit"]
    if args.command == "check":
        return 0 if code == 0 else 1
    return code


if __name__ == "__main__":
    sys.exit(main())
