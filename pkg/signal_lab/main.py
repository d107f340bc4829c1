"""
Process entry point: parse arguments, configure logging, dispatch to a
verb and map failures onto stable exit codes.
"""

import sys
from typing import List, Optional

import structlog
from pydantic import ValidationError

from signal_lab.cli.app import build_parser
from signal_lab.core.config import Settings
from signal_lab.core.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    InvalidProgramError,
    MissingRoutingError,
    ScenarioParseError,
    ScenarioValidationError,
    SignalLabError,
    UsageError,
)
from signal_lab.core.exit_codes import EXIT_CONFIG, EXIT_RUNTIME, EXIT_USAGE
from signal_lab.core.logging import configure_logging

logger = structlog.get_logger(__name__)

CONFIG_ERRORS = (
    ConfigurationError,
    DimensionMismatchError,
    InvalidProgramError,
    MissingRoutingError,
    ScenarioParseError,
    ScenarioValidationError,
    ValidationError,
    OSError,
)


def _report(message: str) -> None:
    print(f"signal-lab: error: {message}", file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        run_settings = Settings(LOG_LEVEL=args.log_level, WORKERS=args.workers, LOG_JSON=args.log_json)
    except ValidationError as exc:
        _report(str(exc.errors()[0]["msg"]))
        return EXIT_USAGE
    args.workers = run_settings.WORKERS
    configure_logging(run_settings.LOG_LEVEL, run_settings.LOG_JSON)

    try:
        return args.handler(args)
    except UsageError as exc:
        _report(str(exc))
        return EXIT_USAGE
    except ScenarioValidationError as exc:
        for line in exc.report:
            _report(line)
        return EXIT_CONFIG
    except CONFIG_ERRORS as exc:
        _report(str(exc))
        return EXIT_CONFIG
    except SignalLabError as exc:
        logger.error("command_failed", command=args.command, error=str(exc), exc_info=True)
        _report(str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
