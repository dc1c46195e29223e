"""Command line driver.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
parse or resolution errors.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, catalog
from .dsl import print_chart
from .errors import VerifierError
from .runner import emit_report, run_suite
from .suites import SUITES


def _pairs(items, what):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"{what} must look like name=value, got {item!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} {key!r} needs a numeric value, got {value!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qchverify", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run an identity suite on sampled points")
    v.add_argument("chart", help="catalog chart name or path to a chart file")
    v.add_argument("--suite", default="full", choices=SUITES)
    v.add_argument("--points", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--order", type=int, default=2, choices=(2, 3))
    v.add_argument("--tol", nargs="*", metavar="CHECK=TOL", help="per-check tolerance overrides")
    v.add_argument("--param", nargs="*", metavar="NAME=VALUE", help="chart parameter overrides")
    v.add_argument("--format", default="json", choices=("json", "csv", "markdown"))
    v.add_argument("--out", help="report path (default: standard output)")
    v.add_argument("--controls", action="store_true", help="also run negative controls")
    v.add_argument("--workers", type=int, default=1)

    sub.add_parser("list-charts", help="print catalog chart names")
    sub.add_parser("list-suites", help="print suite names")
    d = sub.add_parser("dump-chart", help="print a catalog chart as DSL text")
    d.add_argument("name")
    d.add_argument("--param", nargs="*", metavar="NAME=VALUE")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "list-charts":
            for name in catalog.SURFACE_CHARTS + catalog.REFERENCE_CHARTS:
                print(name)
            return 0
        if args.command == "list-suites":
            for name in SUITES:
                print(name)
            return 0
        if args.command == "dump-chart":
            sys.stdout.write(print_chart(catalog.get_chart(args.name, **_pairs(args.param, "parameter"))))
            return 0
        report = run_suite(args.chart, args.suite, args.points, args.seed, _pairs(args.tol, "tolerance"),
                           args.order, args.controls, _pairs(args.param, "parameter"), args.workers)
    except (VerifierError, argparse.ArgumentTypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = emit_report(report, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    s = report.summary
    print(f"{report.chart}/{report.suite}: {s['n_pass']} passed, {s['n_fail']} failed", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
