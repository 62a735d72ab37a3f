"""``vfab`` command line: run a demo test, generate a bundle, list tests."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigDB
from .ipxact import IpxactError, emit_bundle, load_bundle, parse_attr_map, parse_ipxact, validate_cross

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="vfab", description="Video IP verification demo")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run one test at one integration level")
    run.add_argument("--test", required=True)
    run.add_argument("--level", default="ip", help="ip, subsys or soc")
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--config", type=Path, help="config file of 'pattern key value' lines")
    run.add_argument("--fault", default="none", help="fault mode injected into the DUT, e.g. corrupt_pixel:37")
    run.add_argument("--report", type=Path, help="directory for report.txt and report.kv")
    run.add_argument("--bundle", type=Path, action="append", default=[],
                     help="bundle replacing the shipped one for its block (repeatable)")

    gen = sub.add_parser("gen", help="generate a bundle from IP-XACT and an attribute map")
    gen.add_argument("--ipxact", type=Path, required=True)
    gen.add_argument("--attrmap", type=Path, required=True)
    gen.add_argument("--out", type=Path, required=True)

    sub.add_parser("list-tests", help="list registered tests and their levels")
    return p


def cmd_run(args):
    from .demo.harness import UsageError, run_test
    from .demo.report import kv_lines, report_write, text_report

    try:
        db = ConfigDB()
        if args.config:
            db.load_text(args.config.read_text(), str(args.config))
        bundles = [load_bundle(b) for b in args.bundle]
    except (OSError, ValueError, IpxactError) as exc:
        print(f"vfab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        outcome = run_test(args.test, args.level, args.seed, args.fault, config=db, bundles=bundles)
    except UsageError as exc:
        print(f"vfab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.report:
        report_write(outcome, args.report)
    sys.stdout.write(text_report(outcome) if args.verbose else "\n".join(kv_lines(outcome)) + "\n")
    return EXIT_OK if outcome.passed else EXIT_FAIL


def cmd_gen(args):
    warnings = []
    try:
        ir = parse_ipxact(args.ipxact.read_text(), warnings)
        amap = parse_attr_map(args.attrmap.read_text())
        report = validate_cross(ir, amap)
        emit_bundle(ir, amap, args.out)
    except (OSError, IpxactError) as exc:
        print(f"vfab gen: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for w in warnings + report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {args.out}: {ir.register_count()} registers, {len(amap.entries)} attributes")
    return EXIT_OK


def cmd_list(args):
    from .demo.harness import list_tests
    for spec in list_tests():
        print(f"{spec.name:<20} {','.join(spec.levels):<16} {spec.description}")
    return EXIT_OK


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "gen": cmd_gen, "list-tests": cmd_list}[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
