"""Main entry point for the gsgd command line."""
import argparse
import sys
from typing import List, Optional

from commands import ExperimentCommands
from config import Config
from utils.logger import setup_logger


# Root logger so every module's get_logger(__name__) shares the handlers
logger = setup_logger("")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsgd",
        description="Generalized SGD laboratory: run methods, validate schedules, sweep seeds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config", help="path to the experiment JSON")

    counter = sub.add_parser("counterexample", help="signSGD on |2u+v| + |u+10| from (eps0, eps0)")
    counter.add_argument("--eps0", type=float, default=0.2)
    counter.add_argument("--eta0", type=float, default=0.3)
    counter.add_argument("--K", type=int, default=10_000)
    counter.add_argument("--out", default=None, help="directory for the trajectory CSV")

    val = sub.add_parser("validate", help="check a config's stepsize schedule")
    val.add_argument("config")

    sweep = sub.add_parser("sweep", help="run every (seed, c) pair of the sweep block")
    sweep.add_argument("config")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch to the command handlers.

    Returns:
        Process exit code (0 ok, 1 bad input, 2 divergence)
    """
    args = build_parser().parse_args(argv)
    try:
        Config.validate()
    except ValueError as e:
        logger.error(f"Invalid settings: {e}")
        return 1
    commands = ExperimentCommands()
    if args.command == "run":
        return commands.cmd_run(args.config)
    if args.command == "counterexample":
        return commands.cmd_counterexample(args.eps0, args.eta0, args.K, out_dir=args.out)
    if args.command == "validate":
        return commands.cmd_validate(args.config)
    return commands.cmd_sweep(args.config)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)
