"""`dpa` command line: run, sweep, export-figdata, validate-config.

Exit codes: 0 success, 2 invalid config or input files, 3 numeric failure during training.
"""

import sys
from argparse import ArgumentParser

from loguru import logger

from core.errors import ConfigError, FigDataError, NumericError, ScenarioError
from src.components.export_figdata import main as export_figdata_main
from src.components.run import main as run_main
from src.components.sweep import main as sweep_main
from src.components.validate_config import main as validate_config_main

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = {
    "run": (run_main, "train one config for each of its seeds"),
    "sweep": (sweep_main, "one run per (axis value, seed) plus a mean/std summary"),
    "export-figdata": (export_figdata_main, "iteration-vs-gap/weight series from metrics files"),
    "validate-config": (validate_config_main, "check a config and print it normalized"),
}


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="dpa", description="dual probabilistic alignment simulator")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text) in COMMANDS.items():
        module.add_arguments(sub.add_parser(name, help=help_text))
    return parser


def setup_logger(verbose: bool = False, quiet: bool = False) -> None:
    level = "DEBUG" if verbose else ("WARNING" if quiet else "INFO")
    logger.remove()
    logger.add(sys.stderr, level=level)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(args.verbose, args.quiet)
    module, _ = COMMANDS[args.command]
    try:
        return module.main(args)
    except (ConfigError, ScenarioError, FigDataError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except NumericError as e:
        logger.error(f"numeric failure: {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
