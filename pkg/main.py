import argparse
import logging
import sys

from config import APP_NAME, APP_VERSION, EXECUTABLE_NAME
from core.errors import SDSPredictError
from harness.commands import COMMANDS, run
from harness.experiment_config import load_config
from logger import log_run_header, logger, setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=EXECUTABLE_NAME,
        description=f"{APP_NAME}: simulate stochastic dynamical systems, evaluate prediction "
                    f"performance limits and design unpredictable noise.",
    )
    parser.add_argument('command', choices=sorted(COMMANDS), help="What to run")
    parser.add_argument('--config', help="Experiment config file (INI format)")
    parser.add_argument('--seed', type=int, help="Override the experiment seed")
    parser.add_argument('--out', dest='output_dir', help="Output directory for CSV and SVG files")
    parser.add_argument('--workers', type=int, help="Worker processes for trajectory evaluation")
    parser.add_argument('--budget', type=int, help="Monte-Carlo sample budget per box probability")
    parser.add_argument(
        '--log-level', default='INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help="Console and file log level",
    )
    parser.add_argument('--no-log-file', action='store_true', help="Log to the console only")
    parser.add_argument('--version', action='version', version=f"{APP_NAME} {APP_VERSION}")
    return parser


def main(argv=None) -> int:
    """CLI entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)

    # 1. Initialize logging first
    setup_logging(getattr(logging, args.log_level), log_to_file=not args.no_log_file, command=args.command)
    log_run_header(
        args.command, config=args.config, seed=args.seed, out=args.output_dir,
        workers=args.workers, budget=args.budget,
    )

    overrides = {
        'seed': args.seed,
        'output_dir': args.output_dir,
        'workers': args.workers,
        'budget': args.budget,
    }
    try:
        # 2. Load config, then run the command
        config = load_config(args.config, overrides)
        run(config, args.command)
        return 0
    except SDSPredictError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.critical(f"Unhandled exception: {e}", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
