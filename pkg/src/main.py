#!/usr/bin/env python3

"""Command-line interface for the mining-cluster selection simulator."""

import argparse
import dataclasses
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from src.config import SWEEP_VARIABLES, ExperimentConfig, load_config
from src.experiment_runner import ExperimentRunner, validate_auction
from src.utils.file_utils import parse_grid
from src.utils.result_file_manager import ResultFileManager

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
LOG_LEVEL_ENV = "V2X_AUCTION_LOG_LEVEL"


def setup_logging(log_level: str) -> None:
    """Set up basic logging configuration.

    Args:
        log_level: Name of the logging level
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    logging.basicConfig(
        level=level,
        format="%(levelname)s: %(message)s",
        handlers=[logging.StreamHandler()],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    default_level = os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    if default_level not in LOG_LEVELS:
        default_level = "INFO"

    parser = argparse.ArgumentParser(
        description="Simulate auction-based mining-cluster selection for vehicular offloading",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        default=default_level,
        help=f"Set the logging level (env {LOG_LEVEL_ENV})",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def add_run_options(sub, config_required=True):
        sub.add_argument(
            "-c", "--config", required=config_required, help="Experiment TOML file"
        )
        sub.add_argument("--seed", type=int, help="Override the base seed")
        sub.add_argument("-o", "--out", help="Override the output directory")

    run = commands.add_parser(
        "run",
        help="Run the configured experiment",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    add_run_options(run)
    run.add_argument("--threads", type=int, help="Worker processes for replications")

    sweep = commands.add_parser(
        "sweep",
        help="Run the experiment over a sweep grid",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    add_run_options(sweep)
    sweep.add_argument("--var", required=True, choices=SWEEP_VARIABLES, help="Swept variable")
    sweep.add_argument("--grid", required=True, help="Comma-separated sweep values")
    sweep.add_argument("--threads", type=int, help="Worker processes for replications")

    validate = commands.add_parser(
        "validate",
        help="Audit the auction against the exact max-weight matching",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    add_run_options(validate, config_required=False)
    validate.add_argument("-n", "--instances", type=int, default=200, help="Random instances")
    validate.add_argument("--delta", type=float, help="Bid increment (default from config)")

    trace = commands.add_parser(
        "trace",
        help="Record the per-round auction trace of one replication",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    add_run_options(trace)
    trace.add_argument("--sweep-index", type=int, default=0, help="Sweep point to trace")
    trace.add_argument("--replication", type=int, default=0, help="Replication to trace")

    return parser


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    """Apply CLI flags on top of the loaded config and re-validate."""
    run_changes = {}
    if getattr(args, "seed", None) is not None:
        run_changes["seed"] = args.seed
    if getattr(args, "out", None):
        run_changes["output_dir"] = args.out
    if getattr(args, "threads", None) is not None:
        run_changes["threads"] = args.threads
    if args.command == "sweep":
        run_changes["sweep_var"] = args.var
        run_changes["sweep_grid"] = parse_grid(args.grid)
    if args.command == "trace":
        run_changes["trace"] = True
    if run_changes:
        config = dataclasses.replace(config, run=dataclasses.replace(config.run, **run_changes))
    if getattr(args, "delta", None) is not None:
        config = dataclasses.replace(
            config, auction=dataclasses.replace(config.auction, delta=args.delta)
        )
    config.validate()
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the simulator."""
    load_dotenv()

    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        if args.config:
            config = load_config(args.config)
        else:
            config = ExperimentConfig()
        config = apply_overrides(config, args)
        logging.info(f"Writing results to: {config.output_dir}")
        file_manager = ResultFileManager(config.output_dir)

        if args.command in ("run", "sweep"):
            ExperimentRunner(config, file_manager).run()
        elif args.command == "trace":
            ExperimentRunner(config, file_manager).trace(args.sweep_index, args.replication)
        elif args.command == "validate":
            records = validate_auction(
                args.instances, config.auction.delta, config.run.seed, file_manager
            )
            failures = [r for r in records if not r.ok]
            if failures:
                logging.error(
                    f"Error: {len(failures)} of {len(records)} instances violate the audit"
                )
                return 1

    except Exception as e:
        logging.error(f"Error: {str(e)}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
