"""
Command-line entry point for the Heavy Ball lab.

Subcommands: peak, run, adaptive, compare and selftest. Results are written as
CSV to standard output or to --out; logs go to stderr.
"""
import argparse
import logging
import sys
from dataclasses import replace
from typing import Dict, List, Optional

from app_setup import setup_logging
from config import (
    COMMANDS,
    EXIT_CONFIG_ERROR,
    EXIT_DIVERGED,
    EXIT_OK,
    EXIT_SELFTEST_FAILED,
)
from experiment_config import ExperimentConfig, RecurrenceSpec, load_config, validate_config
from experiment_runner import run_command
from file_utils import write_output
from selftest import run_selftest
from utils import AdaptiveAbort, ConfigError, ConsistencyError, DivergenceError

logger = logging.getLogger(__name__)

_PEAK_FLAGS = ("rho", "a1", "a2", "x0", "x1", "K")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavyball-lab",
        description="Peak effect, Lyapunov and restart experiments for the Heavy Ball method.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment definition")
    common.add_argument("--out", help="Output CSV path (default: standard output)")
    common.add_argument("--seed", type=int, help="Override the seed of the experiment")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    common.add_argument("--log-file", help="Also write logs to this file")

    sub = parser.add_subparsers(dest="command", required=True)

    peak = sub.add_parser("peak", parents=[common], help="Iterate a scalar recurrence and report its peak")
    peak.add_argument("--rho", type=float, help="Double root of the characteristic polynomial")
    peak.add_argument("--a1", type=float, help="Coefficient of x_{k-1}")
    peak.add_argument("--a2", type=float, help="Coefficient of x_{k-2}")
    peak.add_argument("--x0", type=float, help="Initial value x_0")
    peak.add_argument("--x1", type=float, help="Initial value x_1")
    peak.add_argument("--k", dest="K", type=int, help="Index of the last iterate")

    sub.add_parser("run", parents=[common], help="Run Heavy Ball from a recipe")
    adaptive = sub.add_parser("adaptive", parents=[common], help="Run the adaptive method with L-doubling")
    adaptive.add_argument("--eps", type=float, help="Slack of the acceptance tests")
    sub.add_parser("compare", parents=[common], help="Compare restart policies")
    sub.add_parser("selftest", parents=[common], help="Run the acceptance suite")
    return parser


def _peak_overrides(args: argparse.Namespace) -> Dict[str, float]:
    overrides = {name: getattr(args, name) for name in _PEAK_FLAGS if getattr(args, name) is not None}
    if "rho" in overrides:
        overrides.setdefault("a1", None)
        overrides.setdefault("a2", None)
    elif "a1" in overrides or "a2" in overrides:
        overrides["rho"] = None
    return overrides


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """
    Build the experiment for a subcommand from --config and the flags.

    Raises:
        ConfigError: If the definition is missing or invalid
    """
    overrides = _peak_overrides(args) if args.command == "peak" else {}
    if args.config:
        config = load_config(args.config)
    elif overrides:
        config = ExperimentConfig(name="peak", command="peak")
    else:
        raise ConfigError("--config is required", "config")

    if config.command is not None and config.command != args.command:
        logger.warning(f"{args.config} is a '{config.command}' recipe, running it as '{args.command}'")
    if overrides:
        config = replace(config, recurrence=replace(config.recurrence or RecurrenceSpec(), **overrides))
    if args.command == "adaptive" and args.eps is not None:
        config = replace(config, method=replace(config.method, eps=args.eps))
    config = config.with_seed(args.seed)
    validate_config(config)
    return config


def handle_error(error: Exception, command: str) -> int:
    """Map an exception from a command to its exit code."""
    if isinstance(error, ConfigError):
        logger.error(f"Invalid experiment definition: {error}")
        return EXIT_CONFIG_ERROR
    if isinstance(error, ConsistencyError):
        logger.error(f"Internal cross-check failed in {command}: {error}")
        return EXIT_CONFIG_ERROR
    if isinstance(error, (DivergenceError, AdaptiveAbort)):
        logger.error(f"{command} diverged: {error}")
        return EXIT_DIVERGED
    if isinstance(error, ValueError):
        logger.error(f"Invalid arguments for {command}: {error}")
        return EXIT_CONFIG_ERROR
    logger.error(f"Unexpected error in {command}: {error}", exc_info=True)
    return EXIT_CONFIG_ERROR


def handle_command(args: argparse.Namespace) -> int:
    """Run peak, run, adaptive or compare and write its CSV."""
    try:
        config = load_experiment(args)
        result = run_command(args.command, config)
    except Exception as e:
        return handle_error(e, args.command)

    out = args.out or config.outputs.csv_path
    if not write_output(result.text, out):
        logger.error(f"Could not write output to {out}")
        return EXIT_CONFIG_ERROR
    logger.info(f"{args.command} finished with status {result.status} (exit code {result.exit_code})")
    return result.exit_code


def handle_selftest(args: argparse.Namespace) -> int:
    results, report = run_selftest()
    if not write_output(report, args.out):
        logger.error(f"Could not write the selftest report to {args.out}")
        return EXIT_CONFIG_ERROR
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Selftest failed: {', '.join(failed)}")
        return EXIT_SELFTEST_FAILED
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    setup_logging(quiet=args.quiet, log_file=args.log_file)
    logger.info(f"heavyball-lab {args.command} started")

    if args.command == "selftest":
        return handle_selftest(args)
    if args.command in COMMANDS:
        return handle_command(args)
    return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
