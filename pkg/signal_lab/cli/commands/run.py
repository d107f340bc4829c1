"""
``run``: simulate one scenario with one seed.
"""

import argparse
from pathlib import Path

import structlog

from signal_lab.core.exit_codes import EXIT_GRIDLOCK, EXIT_OK
from signal_lab.services.experiments import format_ttt, write_run_outputs
from signal_lab.services.scenarios import load_scenario
from signal_lab.services.simulation import run

logger = structlog.get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="simulate one scenario and write queue and summary CSVs")
    parser.add_argument("scenario", type=Path, help="scenario file")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--window", type=float, default=None, help="queue averaging window in seconds (default 300)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    result = run(scenario, args.seed)
    paths = write_run_outputs(result, args.out, args.window)
    logger.info("run_written", out=str(args.out), files=sorted(p.name for p in paths.values()))
    print(f"TTT: {format_ttt(result)}")
    return EXIT_GRIDLOCK if result.infinite else EXIT_OK
