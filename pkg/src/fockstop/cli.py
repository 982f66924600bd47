"""Command-line entry point: ``fockstop run | converge | calibrate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness.config import SuiteConfig, load_config
from .harness.runner import run_suites
from .harness.truncation import calibrate_tolerance, convergence_study, write_csv
from .model import FockStopError

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fockstop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run theorem suites and write JSON and Markdown reports")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--suite", action="append", dest="suites", metavar="NAME", help="restrict to this suite (repeatable)")
    run.add_argument("--seed", action="append", dest="seeds", type=int, metavar="N", help="override the seed list (repeatable)")
    run.add_argument("--out", type=Path, default=Path("fockstop-report"))

    conv = sub.add_parser("converge", help="write the refinement convergence table as CSV")
    conv.add_argument("--config", required=True, type=Path)
    conv.add_argument("--out", required=True, type=Path)

    cal = sub.add_parser("calibrate", help="print the calibrated truncation tolerance")
    cal.add_argument("--config", required=True, type=Path)
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    changes = {}
    if args.suites:
        changes["suites"] = tuple(args.suites)
    if args.seeds:
        changes["seeds"] = tuple(args.seeds)
    if changes:
        config = config.replace(**changes)
    report = run_suites(config)
    json_path, _ = report.write(args.out)
    for r in report.failures:
        print(f"FAIL {r.name}: residual {r.residual:.3e} > {r.tolerance:.3e} ({r.anchor})")
    total = len(report.records)
    print(f"{total - len(report.failures)}/{total} assertions passed; report at {json_path}")
    return EXIT_PASS if report.ok else EXIT_FAIL


def _cmd_converge(args) -> int:
    config = load_config(args.config)
    rows = convergence_study(config)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "convergence.csv"
    write_csv(rows, path)
    print(f"{len(rows)} rows written to {path}")
    return EXIT_PASS


def _cmd_calibrate(args) -> int:
    config = load_config(args.config)
    tau = calibrate_tolerance(config)
    print(json.dumps({"tol_trunc": tau, "amplitude_cap": config.amplitude_cap, "cutoff_N": config.model.cutoff_N}))
    return EXIT_PASS


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "converge": _cmd_converge, "calibrate": _cmd_calibrate}[args.command]
    try:
        return handler(args)
    except (FockStopError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
