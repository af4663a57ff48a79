"""Command-line front end.

    adastab classify <scenario> [--out DIR]
    adastab simulate <scenario> --out DIR
    adastab sweep <scenario> --param KEY --values V1,V2,... --out DIR [--workers N]
    adastab selftest [--seed N]
    adastab list

``<scenario>`` is a path to a ``.scn`` file or the name of a shipped
scenario (see ``adastab list``). Exit codes: 0 ok, 2 divergence,
3 hypothesis failure, 4 I/O or parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import AdastabError
from .runner import EXIT_IO, EXIT_OK, classify_scenario, run, sweep
from .scenario import parse_scenario

log = logging.getLogger("adastab")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with the divergence code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def shipped_scenarios() -> dict:
    root = resources.files("adastab") / "scenarios"
    return {p.name[:-4]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".scn")}


def _locate(ref: str) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    shipped = shipped_scenarios()
    name = ref[:-4] if ref.endswith(".scn") else ref
    if name in shipped:
        return shipped[name]
    return p


def _parse_values(text: str) -> list:
    if not text.strip():
        return []
    out = []
    for item in text.split(","):
        item = item.strip()
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            raise ValueError(f"sweep value {item!r} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adastab", description="Distributed adaptive high-gain stabilization toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="classify matrices.B of a scenario (M/H-matrix, scalings)")
    p.add_argument("scenario")
    p.add_argument("--out", help="also write report.json to this directory")

    p = sub.add_parser("simulate", help="run a scenario and write CSV/JSON artifacts")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a scenario once per parameter value")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted scenario key, e.g. gain.c")
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None, help="parallel runs (default: $ADASTAB_WORKERS or 1)")

    p = sub.add_parser("selftest", help="run the built-in invariant suites")
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("list", help="list shipped scenarios")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        for name, path in sorted(shipped_scenarios().items()):
            print(f"{name:28s} {path}")
        return EXIT_OK
    if args.command == "selftest":
        from .selftest import run_all

        return EXIT_OK if run_all(args.seed) else 1

    try:
        scenario = parse_scenario(_locate(args.scenario))
    except (AdastabError, ValueError) as exc:
        print(f"adastab: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "classify":
        try:
            report = classify_scenario(scenario)
        except (OSError, ValueError, AdastabError) as exc:
            print(f"adastab: {exc}", file=sys.stderr)
            return EXIT_IO
        text = json.dumps(report, indent=2)
        print(text)
        if args.out:
            try:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "report.json").write_text(text + "\n")
            except OSError as exc:
                print(f"adastab: {exc}", file=sys.stderr)
                return EXIT_IO
        return EXIT_OK

    if args.command == "simulate":
        arts = run(scenario, args.out)
        if "error" in arts.report:
            print(f"adastab: {arts.report['error']}", file=sys.stderr)
        else:
            log.info("wrote %s", arts.report_path)
        return arts.exit_code

    try:
        values = _parse_values(args.values)
        results = sweep(scenario, args.param, values, args.out, workers=args.workers)
    except (OSError, ValueError, AdastabError) as exc:
        print(f"adastab: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{len(results)} runs, summary in {Path(args.out) / 'summary.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
