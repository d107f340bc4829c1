"""
``sweep``: run a scenario over a cartesian parameter grid and several seeds.
"""

import argparse
from pathlib import Path

from signal_lab.core.exit_codes import EXIT_OK
from signal_lab.services.experiments import parse_grid, sweep, write_sweep_outputs
from signal_lab.services.scenarios import SWEEP_PARAMS, load_scenario


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="run a parameter grid and write summary.csv")
    parser.add_argument("scenario", type=Path, help="scenario file")
    parser.add_argument(
        "--param",
        action="append",
        required=True,
        metavar="NAME=V1,V2",
        help=f"grid axis, repeatable; names: {', '.join(SWEEP_PARAMS)}",
    )
    parser.add_argument("--seeds", type=int, nargs="+", default=[0], help="seeds (default 0)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    results = sweep(scenario, parse_grid(args.param), args.seeds, args.workers)
    write_sweep_outputs(results, args.out)
    print(f"{len(results)} runs written to {args.out / 'summary.csv'}")
    return EXIT_OK
