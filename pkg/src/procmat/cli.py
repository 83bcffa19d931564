"""``procmat`` command line: run, validate and sweep scenario files."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import TOL, tolerances
from .errors import InputError, ProcmatError
from .scenario import emit, load_text, parse_scenario, run, shipped_scenarios

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def _parse_tol(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            key, value = "negativity", item
        if not hasattr(TOL, key):
            raise InputError(f"unknown tolerance {key!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise InputError(f"tolerance {key!r} needs a number, got {value!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procmat", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file, or the name of a shipped scenario")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="output format (default: csv for sweep, json otherwise)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override a tolerance; a bare number sets the negativity threshold")
    common.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")

    sub.add_parser("run", parents=[common], help="run every analysis of a scenario")
    sub.add_parser("validate", parents=[common], help="check a scenario against the schema")
    sw = sub.add_parser("sweep", parents=[common], help="run one named negativity sweep")
    sw.add_argument("--analysis", required=True, help="name of the sweep analysis")
    sub.add_parser("list", help="list shipped scenarios")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "list":
        print("\n".join(shipped_scenarios()))
        return EXIT_OK
    try:
        with tolerances(**_parse_tol(args.tol)):
            sc = parse_scenario(load_text(args.scenario))
            if args.command == "validate":
                print(f"{args.scenario}: valid ({len(sc.analyses)} analyses)", file=sys.stderr)
                return EXIT_OK
            only = args.analysis if args.command == "sweep" else None
            fmt = args.format or ("csv" if args.command == "sweep" else "json")
            bundle = run(sc, seed=args.seed, jobs=max(1, args.jobs), only=only)
            text = emit(bundle, fmt, args.out)
            if args.out is None:
                sys.stdout.write(text)
    except InputError as exc:
        print(f"procmat: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ProcmatError as exc:
        print(f"procmat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"procmat: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
