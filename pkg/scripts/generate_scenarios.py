#!/usr/bin/env python3
"""
Write the standard scenario set: desk-scale Manhattan grids at three
demand levels with correct and wrong controller turning ratios, and the
diverging isolated junction with its bounded-cycle variant.
"""

import argparse
import os
import sys
from pathlib import Path

# Add the package directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from signal_lab.core.logging import configure_logging
from signal_lab.schemas.scenario import DEFAULT_TURNS, WRONG_TURNS
from signal_lab.services.scenarios import build_isolated_junction, build_manhattan, save_scenario

DELTAS = (0.05, 0.10, 0.15)


def generate(out_dir: Path, rows: int, cols: int) -> list:
    written = []
    for delta in DELTAS:
        for label, believed in (("correct", None), ("wrong", WRONG_TURNS)):
            scenario = build_manhattan(
                rows,
                cols,
                delta,
                DEFAULT_TURNS,
                controller_turn_spec=believed,
                mode="stochastic",
                name=f"manhattan-{rows}x{cols}-d{delta:g}-{label}",
            )
            written.append(save_scenario(scenario, out_dir / f"{scenario.name}.scn"))

    written.append(save_scenario(build_isolated_junction(0.1, 0.1, 1.0, 0.0, 1.0), out_dir / "isolated-divergent.scn"))
    written.append(
        save_scenario(
            build_isolated_junction(0.1, 0.1, 1.0, 0.2, 1.0, horizon=100_000.0),
            out_dir / "isolated-bounded.scn",
        )
    )
    return written


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--rows", type=int, default=4)
    parser.add_argument("--cols", type=int, default=4)
    args = parser.parse_args()

    configure_logging("INFO")
    for path in generate(args.out_dir, args.rows, args.cols):
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
