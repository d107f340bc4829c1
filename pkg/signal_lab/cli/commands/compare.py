"""
``compare``: paired runs of several controllers on shared seeds.
"""

import argparse
from pathlib import Path

from signal_lab.core.exceptions import UsageError
from signal_lab.core.exit_codes import EXIT_OK
from signal_lab.services.experiments import compare, ranking, write_compare_outputs
from signal_lab.services.scenarios import load_scenario


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="compare controllers and write a TTT ranking")
    parser.add_argument("scenario", type=Path, help="scenario file")
    parser.add_argument(
        "--controller",
        action="append",
        default=[],
        metavar="SPEC",
        help="controller spec such as gpa-shorted:kappa=10 or max-pressure:d=10,wrong_tr=1; repeat at least twice",
    )
    parser.add_argument("--seeds", type=int, nargs="+", default=[0], help="shared seeds (default 0)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--window", type=float, default=None, help="queue averaging window in seconds (default 300)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if len(args.controller) < 2:
        raise UsageError("compare needs at least two --controller specs")
    scenario = load_scenario(args.scenario)
    results = compare(scenario, args.controller, args.seeds, args.workers)
    write_compare_outputs(results, args.out, args.window)
    print(ranking(results).to_string(index=False))
    return EXIT_OK
