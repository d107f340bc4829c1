"""
``generate``: write a Manhattan grid or isolated-junction scenario file.
"""

import argparse
from pathlib import Path

from signal_lab.core.exit_codes import EXIT_OK
from signal_lab.schemas.scenario import DEFAULT_TURNS, WRONG_TURNS
from signal_lab.services.experiments import default_controller, parse_controller_spec
from signal_lab.services.scenarios import (
    apply_param,
    build_isolated_junction,
    build_manhattan,
    check_scenario,
    save_scenario,
)


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="emit a scenario file")
    kinds = parser.add_subparsers(dest="kind", required=True)

    grid = kinds.add_parser("manhattan", help="grid of signalized junctions")
    grid.add_argument("--rows", type=int, default=4)
    grid.add_argument("--cols", type=int, default=4)
    grid.add_argument("--delta", type=float, default=0.05, help="boundary departure probability per lane and second")
    grid.add_argument("--mode", choices=("fluid", "stochastic"), default="stochastic")
    grid.add_argument("--controller", default="gpa-full:kappa=10", metavar="SPEC", help="controller spec")
    grid.add_argument("--wrong-tr", action="store_true", help="controller believes turning ratios 0.1/0.3/0.6")
    grid.add_argument("--capacity", action="store_true", help="finite lane capacities with blocked flow")
    grid.add_argument("--generation-horizon", type=float, default=3600.0)
    grid.add_argument("--horizon", type=float, default=None, help="hard cap in seconds")
    grid.add_argument("--clearance", type=float, default=5.0, help="clearance time T_w in seconds")
    grid.add_argument("--out", type=Path, required=True)
    grid.set_defaults(handler=handle_manhattan)

    iso = kinds.add_parser("isolated", help="two-lane junction with diverging shorted cycles")
    iso.add_argument("--lam", type=float, default=0.1, help="arrival rate on both lanes")
    iso.add_argument("--kappa", type=float, default=0.1)
    iso.add_argument("--clearance", type=float, default=1.0, help="clearance time T_w in seconds")
    iso.add_argument("--w-bar", type=float, default=0.0)
    iso.add_argument("--initial", type=float, default=1.0, help="initial queue A on lane 1")
    iso.add_argument("--horizon", type=float, default=1000.0)
    iso.add_argument("--out", type=Path, required=True)
    iso.set_defaults(handler=handle_isolated)


def handle_manhattan(args: argparse.Namespace) -> int:
    variant, params = parse_controller_spec(args.controller)
    scenario = build_manhattan(
        args.rows,
        args.cols,
        args.delta,
        DEFAULT_TURNS,
        controller_turn_spec=WRONG_TURNS if args.wrong_tr else None,
        mode=args.mode,
        generation_horizon=args.generation_horizon,
        horizon=args.horizon,
        clearance_time=args.clearance,
        capacity=args.capacity,
    )
    scenario = scenario.model_copy(update={"controller": default_controller(variant, scenario)})
    for name, value in params:
        scenario = apply_param(scenario, name, value)
    path = save_scenario(check_scenario(scenario), args.out)
    print(f"wrote {path} ({scenario.network.n_lanes} lanes, {len(scenario.network.junctions)} junctions)")
    return EXIT_OK


def handle_isolated(args: argparse.Namespace) -> int:
    scenario = build_isolated_junction(
        args.lam, args.kappa, args.clearance, args.w_bar, args.initial, horizon=args.horizon
    )
    path = save_scenario(check_scenario(scenario), args.out)
    print(f"wrote {path}")
    return EXIT_OK
