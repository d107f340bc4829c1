"""
Top-level argument parser; every verb lives in ``cli/commands``.
"""

import argparse

from signal_lab import __version__
from signal_lab.cli.commands import compare, generate, run, sweep

COMMANDS = (run, sweep, compare, generate)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signal-lab",
        description="Traffic-signal control laboratory: simulate, sweep and compare junction controllers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", help="DEBUG, INFO, WARNING or ERROR (default WARNING)")
    parser.add_argument("--log-json", action="store_true", help="render log events as JSON on stderr")
    parser.add_argument("--workers", type=int, default=1, help="parallel runs for sweep and compare (default 1)")

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser
