"""Case files, run reports and schedule export.

Case files are JSON with explicit unit-commitment fields (see README for
the schema).  Reports are emitted with sorted keys and fixed float
formatting so identical runs produce byte-identical files; wall-clock
timings go to a separate sidecar file to keep the report deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (MucSolution, SubproblemOutcome, SystemCase, Bus, Branch,
                    Generator, validate_case)


class CaseIOError(Exception):
    """Base class for case/report file problems."""


class CaseFormatError(CaseIOError):
    """Malformed JSON or a schema violation, with the offending location."""


class CaseValidationError(CaseIOError):
    """Structurally complete case that breaks a model invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"case failed validation: {lines}")


_BUS_KEYS = {"id", "demand", "reference"}
_BRANCH_KEYS = {"id", "from", "to", "susceptance", "rate_long_term",
                "rate_emergency", "reconfigurable"}
_GEN_KEYS = {"id", "bus", "p_min", "p_max", "cost_linear", "cost_no_load",
             "cost_startup", "ramp_hourly", "ramp_startup", "ramp_shutdown",
             "ramp_10", "min_up", "min_down", "initial_status", "initial_output"}


def _need(record: dict, key: str, where: str):
    if key not in record:
        raise CaseFormatError(f"{where}: missing required field {key!r}")
    return record[key]


def _check_keys(record: dict, allowed: set[str], where: str):
    unknown = set(record) - allowed
    if unknown:
        raise CaseFormatError(f"{where}: unknown field(s) {sorted(unknown)}")


def case_from_dict(data: dict) -> SystemCase:
    if not isinstance(data, dict):
        raise CaseFormatError("top level must be a JSON object")
    _check_keys(data, {"base_mva", "horizon", "buses", "branches", "generators"}, "case")
    horizon = int(_need(data, "horizon", "case"))
    base_mva = float(_need(data, "base_mva", "case"))

    buses = []
    for i, rec in enumerate(_need(data, "buses", "case")):
        where = f"buses[{i}]"
        _check_keys(rec, _BUS_KEYS, where)
        demand = _need(rec, "demand", where)
        if not isinstance(demand, list):
            raise CaseFormatError(f"{where}: demand must be an array")
        buses.append(Bus(id=int(_need(rec, "id", where)),
                         demand=tuple(float(d) for d in demand),
                         is_reference=bool(rec.get("reference", False))))

    branches = []
    for i, rec in enumerate(_need(data, "branches", "case")):
        where = f"branches[{i}]"
        _check_keys(rec, _BRANCH_KEYS, where)
        branches.append(Branch(
            id=int(_need(rec, "id", where)),
            from_bus=int(_need(rec, "from", where)),
            to_bus=int(_need(rec, "to", where)),
            susceptance=float(_need(rec, "susceptance", where)),
            rate_long_term=float(_need(rec, "rate_long_term", where)),
            rate_emergency=float(_need(rec, "rate_emergency", where)),
            reconfigurable=bool(rec.get("reconfigurable", True))))

    generators = []
    for i, rec in enumerate(_need(data, "generators", "case")):
        where = f"generators[{i}]"
        _check_keys(rec, _GEN_KEYS, where)
        generators.append(Generator(
            id=int(_need(rec, "id", where)),
            bus=int(_need(rec, "bus", where)),
            p_min=float(_need(rec, "p_min", where)),
            p_max=float(_need(rec, "p_max", where)),
            cost_linear=float(_need(rec, "cost_linear", where)),
            cost_no_load=float(_need(rec, "cost_no_load", where)),
            cost_startup=float(_need(rec, "cost_startup", where)),
            ramp_hourly=float(_need(rec, "ramp_hourly", where)),
            ramp_startup=float(_need(rec, "ramp_startup", where)),
            ramp_shutdown=float(_need(rec, "ramp_shutdown", where)),
            ramp_10=float(_need(rec, "ramp_10", where)),
            min_up=int(_need(rec, "min_up", where)),
            min_down=int(_need(rec, "min_down", where)),
            initial_status=bool(rec.get("initial_status", False)),
            initial_output=float(rec.get("initial_output", 0.0))))

    case = SystemCase(buses=tuple(buses), branches=tuple(branches),
                      generators=tuple(generators), horizon=horizon,
                      base_mva=base_mva)
    violations = validate_case(case)
    if violations:
        raise CaseValidationError(violations)
    return case


def case_to_dict(case: SystemCase) -> dict:
    return {
        "base_mva": case.base_mva,
        "horizon": case.horizon,
        "buses": [
            {"id": b.id, "demand": list(b.demand),
             **({"reference": True} if b.is_reference else {})}
            for b in case.buses
        ],
        "branches": [
            {"id": k.id, "from": k.from_bus, "to": k.to_bus,
             "susceptance": k.susceptance,
             "rate_long_term": k.rate_long_term,
             "rate_emergency": k.rate_emergency,
             "reconfigurable": k.reconfigurable}
            for k in case.branches
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
             "cost_linear": g.cost_linear, "cost_no_load": g.cost_no_load,
             "cost_startup": g.cost_startup, "ramp_hourly": g.ramp_hourly,
             "ramp_startup": g.ramp_startup, "ramp_shutdown": g.ramp_shutdown,
             "ramp_10": g.ramp_10, "min_up": g.min_up, "min_down": g.min_down,
             "initial_status": g.initial_status,
             "initial_output": g.initial_output}
            for g in case.generators
        ],
    }


def parse_case(path: str | Path) -> SystemCase:
    """Read, schema-check and validate a case file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseIOError(f"cannot read case file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path}: malformed JSON at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from None
    try:
        return case_from_dict(data)
    except CaseFormatError as exc:
        raise CaseFormatError(f"{path}: {exc}") from None


def write_case(case: SystemCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2, sort_keys=True) + "\n")


@dataclass
class IterationStats:
    iteration: int
    muc_objective: float
    candidates: int
    screened_out: int
    pcfc_solved: int
    pcfc_infeasible: int
    nr_pcfc_solved: int
    switches_found: int
    cuts_added: int
    screen_audit_max_slack: float | None = None

    def to_dict(self) -> dict:
        out = {
            "iteration": self.iteration,
            "muc_objective": self.muc_objective,
            "candidates": self.candidates,
            "screened_out": self.screened_out,
            "pcfc_solved": self.pcfc_solved,
            "pcfc_infeasible": self.pcfc_infeasible,
            "nr_pcfc_solved": self.nr_pcfc_solved,
            "switches_found": self.switches_found,
            "cuts_added": self.cuts_added,
        }
        if self.screen_audit_max_slack is not None:
            out["screen_audit_max_slack"] = self.screen_audit_max_slack
        return out


@dataclass
class RunReport:
    """Machine-readable summary of one solver run."""

    method: str
    status: str
    converged: bool
    objective: float | None
    iterations: int
    iteration_log: list[IterationStats] = field(default_factory=list)
    subproblems: list[SubproblemOutcome] = field(default_factory=list)
    switches: list[tuple[int, int, int]] = field(default_factory=list)
    unresolved: list[tuple[int, int]] = field(default_factory=list)
    cuts_total: int = 0
    timings: dict[str, float] = field(default_factory=dict)

    def validate(self) -> list[str]:
        problems = []
        if self.iterations < 1:
            problems.append("iterations must be >= 1")
        if self.converged and self.iteration_log:
            if self.iteration_log[-1].cuts_added != 0:
                problems.append("a converged run must add zero cuts in its final iteration")
        return problems


def _report_to_dict(report: RunReport, schedule: MucSolution | None) -> dict:
    doc = {
        "method": report.method,
        "status": report.status,
        "converged": report.converged,
        "objective": report.objective,
        "iterations": report.iterations,
        "iteration_log": [s.to_dict() for s in report.iteration_log],
        "subproblems": [
            {"contingency": o.contingency, "period": o.period, "status": o.status,
             "slack": o.slack, "switch": o.switch}
            for o in report.subproblems
        ],
        "switches": [
            {"contingency": c, "period": t, "branch": j}
            for c, t, j in report.switches
        ],
        "unresolved": [
            {"contingency": c, "period": t} for c, t in report.unresolved
        ],
        "cuts_total": report.cuts_total,
    }
    if schedule is not None:
        doc["solution"] = {
            "generator_ids": list(schedule.generator_ids),
            "branch_ids": list(schedule.branch_ids),
            "bus_ids": list(schedule.bus_ids),
            "u": schedule.u.astype(int).tolist(),
            "v": schedule.v.astype(int).tolist(),
            "p": schedule.p.tolist(),
            "r": schedule.r.tolist(),
            "flow": schedule.flow.tolist(),
            "theta": schedule.theta.tolist(),
            "objective": schedule.objective,
        }
    else:
        doc["solution"] = None
    return doc


def write_report(report: RunReport, schedule: MucSolution | None,
                 out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, schedule.csv and timings.json into ``out_dir``.

    report.json and schedule.csv are byte-deterministic for identical runs;
    timings.json carries the wall-clock numbers and is the only
    non-reproducible artifact.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.json",
                 "schedule": out / "schedule.csv",
                 "timings": out / "timings.json"}
        paths["report"].write_text(
            json.dumps(_report_to_dict(report, schedule), indent=2, sort_keys=True) + "\n")
        with paths["schedule"].open("w", newline="") as fh:
            writer = csv.writer(fh)
            if schedule is not None:
                periods = schedule.u.shape[1]
                writer.writerow(["generator"] + [f"t{t}" for t in range(1, periods + 1)])
                for gi, gid in enumerate(schedule.generator_ids):
                    writer.writerow(
                        [gid] + [f"{int(schedule.u[gi, t])}:{schedule.p[gi, t]:.6f}"
                                 for t in range(periods)])
            else:
                writer.writerow(["generator"])
        paths["timings"].write_text(
            json.dumps({k: round(v, 6) for k, v in sorted(report.timings.items())},
                       indent=2, sort_keys=True) + "\n")
        return paths
    except OSError as exc:
        raise CaseIOError(f"cannot write report to {out}: {exc}") from None


def load_solution(path: str | Path) -> tuple[dict, MucSolution]:
    """Read back a report.json; returns the raw document and its schedule."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CaseIOError(f"cannot read report {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path}: malformed JSON: {exc.msg}") from None
    sol = doc.get("solution")
    if sol is None:
        raise CaseFormatError(f"{path}: report carries no solution block")
    try:
        schedule = MucSolution(
            generator_ids=tuple(sol["generator_ids"]),
            branch_ids=tuple(sol["branch_ids"]),
            bus_ids=tuple(sol["bus_ids"]),
            u=np.asarray(sol["u"], dtype=float),
            v=np.asarray(sol["v"], dtype=float),
            p=np.asarray(sol["p"], dtype=float),
            r=np.asarray(sol["r"], dtype=float),
            flow=np.asarray(sol["flow"], dtype=float),
            theta=np.asarray(sol["theta"], dtype=float),
            objective=float(sol["objective"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseFormatError(f"{path}: solution block is incomplete: {exc}") from None
    return doc, schedule
