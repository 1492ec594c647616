"""Command line entry point ``sis-perturb``."""
from __future__ import annotations

import argparse
import sys

from .config import ScenarioError, load_scenario, with_overrides
from .errors import InvalidParameterError
from .presets import FIGURE_IDS
from .runner import reproduce_figure, run_command

COMMANDS = ("simulate", "classify", "correct", "compare", "run")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sis-perturb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=_u64, help="base seed (overrides the config)")
        p.add_argument("--paths", type=_positive_int, help="number of Monte Carlo paths")
        p.add_argument("--dt", type=_positive_float, help="time step")

    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI scenario or metadata.json")
        common(p)
    p = sub.add_parser("reproduce")
    p.add_argument("figure", choices=FIGURE_IDS)
    common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            files = reproduce_figure(args.figure, args.out or f"out/{args.figure}", args.seed, args.paths, args.dt)
        else:
            scn = with_overrides(load_scenario(args.config), args.seed, args.paths, args.dt, args.out)
            files = run_command(args.command, scn)
    except ScenarioError as exc:
        where = f" [{exc.field}]" if exc.field else ""
        print(f"sis-perturb: {args.command}: {exc}{where}", file=sys.stderr)
        return 2
    except (InvalidParameterError, FileNotFoundError) as exc:
        print(f"sis-perturb: {args.command}: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
