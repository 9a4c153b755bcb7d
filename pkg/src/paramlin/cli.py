"""Command line entry point: ``paramlin diagnose problem.json``."""

from __future__ import annotations

import argparse
import json
import sys

from .pipeline import EXIT_CODES, DiagnoseConfig, StageError, diagnose
from .saexpr import ExprDomainError, ProblemFormatError, load_problem
from .validation import check_positive

EXIT_ERROR = 3


def _positive(kind):
    def conv(text):
        try:
            value = kind(text)
            check_positive(value, "value", integer=kind is int)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected a positive {kind.__name__}, got {text!r}") from exc
        return value

    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paramlin", description="Continuous solutions of parametric linear systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    d = sub.add_parser("diagnose", help="decide solvability and build a solution")
    d.add_argument("problem", help="problem JSON file")
    d.add_argument("--resolution", type=_positive(int), help="grid points per axis")
    d.add_argument("--tol-rank", type=_positive(float), default=DiagnoseConfig.tol_rank)
    d.add_argument("--tol-res", type=_positive(float), default=DiagnoseConfig.tol_res)
    d.add_argument("--shell-c", type=_positive(float), default=DiagnoseConfig.shell_c)
    d.add_argument("--theta", type=_positive(float), default=DiagnoseConfig.theta)
    d.add_argument("--out", help="write the JSON report here (default: stdout)")
    d.add_argument("--solution-csv", help="write per-sample solution values as CSV")
    d.add_argument("--bundle-dump", help="write the stable bundle as JSON lines")
    d.add_argument("--quiet", action="store_true", help="do not print the report to stdout")
    return parser


def _run_diagnose(args) -> int:
    problem = load_problem(args.problem)
    cfg = DiagnoseConfig(
        resolution=args.resolution,
        tol_rank=args.tol_rank,
        tol_res=args.tol_res,
        shell_c=args.shell_c,
        theta=args.theta,
    )
    d = diagnose(problem, cfg)
    report = d.report.to_dict()
    report["problem"] = problem.to_dict()
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    elif not args.quiet:
        print(text)
    if args.bundle_dump:
        with open(args.bundle_dump, "w") as fh:
            d.stable.dump(fh)
    if args.solution_csv:
        if d.solution is None:
            print(f"no solution written: {d.report.verdict}", file=sys.stderr)
        else:
            with open(args.solution_csv, "w", newline="") as fh:
                d.solution.write_csv(fh)
    print(d.report.verdict, file=sys.stderr)
    return EXIT_CODES[d.report.verdict]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else 0
    try:
        return _run_diagnose(args)
    except (ProblemFormatError, ExprDomainError, StageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
