"""
Command-line interface.

    <tool> <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--workers <n>]

Exit codes: 0 success, 2 configuration/ingestion/usage error, 3 numerical
or estimation failure.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from config.settings import settings
from data.artifact_store import ArtifactStore
from models.exceptions import (
    ConfigurationError,
    ContractViolation,
    IngestionError,
    NumericalFailure,
    UndefinedDistanceError,
    UsageError,
)
from models.schema import RunConfig, load_run_config
from runner.commands import COMMANDS, check_blocks

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def resolve_output_dir(out: Optional[str], config: Optional[RunConfig]) -> Path:
    """--out, then $OUTPUT, then the config's output_dir, then the settings default."""
    if out:
        return Path(out)
    if os.getenv('OUTPUT'):
        return Path(os.environ['OUTPUT'])
    if config is not None and config.output_dir:
        return Path(config.output_dir)
    return Path(settings.runtime.output_dir)


def configure_logging(output_dir: Path) -> None:
    """Root logger to stdout and <output_dir>/<log_file>."""
    output_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper()),
        format=settings.log_format,
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(output_dir / settings.runtime.log_file),
        ],
        force=True,
    )


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed {text} is not a 64-bit unsigned integer")
    return value


def _workers(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='freeboundary',
        description='Free-boundary solvers: DPP value iteration, p-energy minimization, '
                    'game simulation and the patched-function construction.',
    )
    parser.add_argument('command', choices=sorted(COMMANDS), help='subcommand to run')
    parser.add_argument('--config', required=True, help='JSON run configuration')
    parser.add_argument('--out', default=None, help='output directory')
    parser.add_argument('--seed', type=_seed, default=None, help='override game.seed')
    parser.add_argument('--workers', type=_workers, default=None, help='worker thread cap')
    return parser


def run(command: str, config_path: str, out: Optional[str] = None, seed: Optional[int] = None,
        workers: Optional[int] = None) -> int:
    """
    Run one subcommand and map its outcome to an exit code.

    Args:
        command: Subcommand name.
        config_path: JSON run configuration.
        out: Output directory override.
        seed: Game seed override.
        workers: Global worker cap.

    Returns:
        0, 2 or 3; unexpected exceptions map to 3.
    """
    if command not in COMMANDS:
        configure_logging(resolve_output_dir(out, None))
        logger.error(f"unknown subcommand '{command}'")
        return EXIT_USAGE
    if workers is not None:
        settings.runtime.workers = workers

    config = None
    try:
        config = load_run_config(config_path)
        check_blocks(command, config)
    except ConfigurationError as e:
        configure_logging(resolve_output_dir(out, config))
        logger.error(f"{command}: invalid configuration: {e}", exc_info=True)
        return EXIT_USAGE

    output_dir = resolve_output_dir(out, config)
    configure_logging(output_dir)
    logger.info(f"{command}: config {config_path}, output {output_dir}, "
                f"workers {settings.runtime.workers}")
    try:
        with ArtifactStore(output_dir, config, command) as store:
            COMMANDS[command](config, store, seed)
    except (ConfigurationError, IngestionError, UsageError, ContractViolation,
            UndefinedDistanceError) as e:
        logger.error(f"{command} failed: {e}", exc_info=True)
        return EXIT_USAGE
    except NumericalFailure as e:
        logger.error(f"{command} failed numerically: {e} report={e.report}", exc_info=True)
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"{command} failed unexpectedly: {e}", exc_info=True)
        return EXIT_NUMERICAL
    logger.info(f"{command} finished")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed, args.workers)
