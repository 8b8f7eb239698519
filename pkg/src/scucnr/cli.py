"""Command-line entry point.

Exit codes: 0 converged/secure, 1 usage or I/O error, 2 proven
infeasibility, 3 non-convergence or failed verification.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backend import SolverError
from .caseio import (CaseIOError, load_solution, parse_case, write_case,
                     write_report)
from .fixtures import random_case
from .orchestrator import (METHODS, ScheduleResult, SolveOptions, solve,
                           verify_solution)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3

_DEFAULTS = SolveOptions()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scucnr",
                     description="Day-ahead unit commitment with N-1 security "
                                 "and corrective line switching.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("solve", parents=[], help="solve a case and write reports",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    run.add_argument("--case", required=True, help="case JSON file")
    run.add_argument("--method", required=True, choices=METHODS)
    run.add_argument("--out", default="runs", help="output directory")
    run.add_argument("--zmax", type=int, default=_DEFAULTS.z_max,
                     help="max switching actions per post-contingency state "
                          "(extensive reconfiguration model)")
    run.add_argument("--cbce-size", type=int, default=_DEFAULTS.cbce_size,
                     help="length of the ranked switching candidate list")
    run.add_argument("--max-iter", type=int, default=_DEFAULTS.max_iterations,
                     help="iteration cap for decomposed methods")
    run.add_argument("--slack-tol", type=float, default=_DEFAULTS.slack_tolerance,
                     help="slack level below which a subproblem counts as feasible")
    run.add_argument("--milp-gap", type=float, default=_DEFAULTS.milp_gap,
                     help="relative MIP gap for master/extensive solves")
    run.add_argument("--workers", type=int, default=_DEFAULTS.workers,
                     help="parallel subproblem workers")
    run.add_argument("--angle-span", type=float, default=_DEFAULTS.angle_span,
                     help="angle-difference bound backing the big-M constants")
    run.add_argument("--enumerate-kr", action="store_true",
                     help="benchmark mode: try every reconfigurable line instead "
                          "of the ranked list")

    ver = sub.add_parser("verify", help="re-audit a written result against its case",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ver.add_argument("--case", required=True)
    ver.add_argument("--result", required=True, help="report.json from a solve run")
    ver.add_argument("--slack-tol", type=float, default=_DEFAULTS.slack_tolerance)

    gen = sub.add_parser("gen-fixture", help="emit a random meshed test case",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True, help="path of the case file to write")
    gen.add_argument("--buses", type=int, default=None)
    gen.add_argument("--generators", type=int, default=None)
    gen.add_argument("--horizon", type=int, default=None)
    return parser


def _cmd_solve(args) -> int:
    case = parse_case(args.case)
    options = SolveOptions(
        method=args.method,
        max_iterations=args.max_iter,
        slack_tolerance=args.slack_tol,
        milp_gap=args.milp_gap,
        cbce_size=args.cbce_size,
        z_max=args.zmax,
        workers=args.workers,
        angle_span=args.angle_span,
        enumerate_reconfigurable=args.enumerate_kr,
    )
    result = solve(case, options)
    if result.status == "infeasible":
        print(f"{args.case}: no feasible schedule exists for method {args.method}",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    paths = write_report(result.report, result.schedule, args.out)
    print(f"method={result.method} status={result.status} "
          f"objective={result.schedule.objective:.2f} iterations={result.iterations}")
    print(f"report: {paths['report']}")
    if result.status != "converged":
        print(f"{args.case}: stopped after {result.iterations} iterations without "
              f"converging; unresolved pairs: {list(result.unresolved)}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_verify(args) -> int:
    case = parse_case(args.case)
    doc, schedule = load_solution(args.result)
    pseudo = ScheduleResult(method=doc.get("method", "td_scuc"),
                            status="converged", converged=True, schedule=schedule,
                            iterations=int(doc.get("iterations", 1)), cuts=(),
                            switches={}, unresolved=(), report=None)
    audit = verify_solution(case, pseudo, slack_tolerance=args.slack_tol)
    if audit.secure:
        print(f"secure: {audit.pairs_checked} post-contingency states verified")
        return EXIT_OK
    for c, t, slack in audit.violations:
        print(f"violation: contingency {c} period {t} slack {slack:.6f}",
              file=sys.stderr)
    return EXIT_NOT_CONVERGED


def _cmd_gen_fixture(args) -> int:
    case = random_case(args.seed, n_buses=args.buses, n_generators=args.generators,
                       horizon=args.horizon)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_case(case, out)
    print(f"wrote {out} (seed {args.seed}, {len(case.buses)} buses, "
          f"{len(case.branches)} branches, {len(case.generators)} generators, "
          f"T={case.horizon})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "gen-fixture":
            return _cmd_gen_fixture(args)
    except CaseIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
