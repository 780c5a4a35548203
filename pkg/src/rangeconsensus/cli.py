"""Command line entry point: run episodes, validate scenario files, list presets."""

from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import replace

from .errors import ParseError, ValidationError
from .output import write_timeseries
from .scenario import PRESETS, load_scenario
from .simulator import run

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangeconsensus",
        description="Distance-only velocity consensus and formation control episodes",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run an episode and write CSV output")
    p_run.add_argument("scenario", help="scenario file or preset:NAME")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--exact-measurements", action="store_true",
                       help="feed ground-truth relative states to the controller")

    p_val = sub.add_parser("validate", help="parse and validate a scenario")
    p_val.add_argument("scenario", help="scenario file or preset:NAME")

    sub.add_parser("presets", help="list built-in presets")
    return parser


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    ts = run(sc, exact_measurements=args.exact_measurements)
    s = write_timeseries(ts, args.out)
    below = s.rounds_to_disagreement_below
    print(f"rounds: {ts.rounds}")
    print(f"final disagreement: {s.final_disagreement:.6g} m/s")
    print(f"final shape error: {s.final_shape_error:.6g} m")
    print(f"rounds to disagreement < {s.threshold:g}: {'never' if below is None else below}")
    print(f"max estimate error: {s.max_estimate_error:.6g} m")
    print(f"output written to {args.out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(f"ok: {len(sc.agents)} agents, {len(sc.graph.edges)} edges, "
          f"{sc.windows} rounds, mode {sc.mode}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name, build in PRESETS.items():
        doc = " ".join((build.__doc__ or "").split())
        print(f"preset:{name}  {doc}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate": _cmd_validate, "presets": _cmd_presets}[args.verb]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return handler(args)
    except (ParseError, ValidationError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
