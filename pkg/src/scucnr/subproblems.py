"""Per-(contingency, period) slave problems.

Three layers of increasing cost: an arithmetic screener that predicts
post-outage flows from distribution factors, a redispatch feasibility LP
whose proportional slack indicates whether the outage is survivable within
10-minute ramps and emergency ratings, and the same LP re-solved with one
additional line opened.  The switch search walks the ranked candidate list
and stops at the first feasible reconfiguration.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backend import Model, SolverError, solve_lp
from .model import (SLACK_TOLERANCE, MucSolution, SubproblemDuals,
                    SubproblemOutcome, SystemCase)
from .network import NetworkSensitivities, check_connectivity
from .formulations import effective_susceptance

SCREEN_SLACK_MW = 1e-6

DUALITY_CHECK_TOL = 1e-6


@dataclass(frozen=True)
class ScreeningResult:
    """Outcome of the distribution-factor screen over a candidate set."""

    candidates: int
    critical: tuple[tuple[int, int], ...]
    overload_ratio: dict[tuple[int, int], float]

    def is_critical(self, c: int, t: int) -> bool:
        return (c, t) in set(self.critical)


def run_csps(case: SystemCase, sens: NetworkSensitivities, muc: MucSolution,
             candidates) -> ScreeningResult:
    """Screen candidate (contingency, period) pairs by predicted overloads.

    Post-outage flow on each surviving branch is the base flow plus the
    distribution factor times the outaged branch's base flow; a pair stays
    critical iff some predicted magnitude exceeds that branch's emergency
    rating.  Pure arithmetic, no optimization.
    """
    critical = []
    ratios: dict[tuple[int, int], float] = {}
    pairs = sorted(candidates, key=lambda ct: (ct[1], ct[0]))
    for c, t in pairs:
        if c not in sens.non_radial:
            raise ValueError(f"branch {c} is not a valid contingency")
        base_c = muc.branch_flow(c, t)
        worst_ratio = 0.0
        worst_excess_mw = -float("inf")
        for k in case.branches:
            if k.id == c:
                continue
            predicted = muc.branch_flow(k.id, t) + sens.lodf_factor(k.id, c) * base_c
            worst_ratio = max(worst_ratio, abs(predicted) / k.rate_emergency)
            worst_excess_mw = max(worst_excess_mw, abs(predicted) - k.rate_emergency)
        ratios[(c, t)] = worst_ratio
        if worst_excess_mw > SCREEN_SLACK_MW:
            critical.append((c, t))
    return ScreeningResult(candidates=len(pairs), critical=tuple(critical),
                           overload_ratio=ratios)


def _add_slack_lp(model: Model, case: SystemCase, muc: MucSolution,
                  c: int, t: int, removed: frozenset[int]) -> None:
    """Shared rows of the redispatch feasibility LP.

    All operative limits are rows (not variable bounds) so that every dual
    lands on a named row; the slack scales each right-hand side towards the
    universally feasible all-zeros point, which also makes the slack column
    equal the rhs column.
    """
    s = model.add_variable("s", lb=0.0, cost=1.0)
    for g in case.generators:
        model.add_variable(f"pg[{g.id}]")
    for k in case.branches:
        model.add_variable(f"fk[{k.id}]")
    for n in case.buses:
        model.add_variable(f"th[{n.id}]")

    for g in case.generators:
        u = muc.commitment(g.id, t)
        p = muc.dispatch(g.id, t)
        down = g.ramp_10 * u - p
        up = g.ramp_10 * u + p
        pg = f"pg[{g.id}]"
        model.add_constraint(f"rd[{g.id}]", {pg: -1.0, s: down}, "<=", down)
        model.add_constraint(f"ru[{g.id}]", {pg: 1.0, s: up}, "<=", up)
        model.add_constraint(f"omin[{g.id}]", {pg: 1.0, s: g.p_min * u}, ">=", g.p_min * u)
        model.add_constraint(f"omax[{g.id}]", {pg: 1.0, s: g.p_max * u}, "<=", g.p_max * u)

    for k in case.branches:
        fk = f"fk[{k.id}]"
        if k.id in removed:
            model.add_constraint(f"open[{k.id}]", {fk: 1.0}, "==", 0.0)
        else:
            beff = effective_susceptance(case, k.id)
            model.add_constraint(f"fd[{k.id}]",
                                 {fk: 1.0, f"th[{k.from_bus}]": -beff,
                                  f"th[{k.to_bus}]": beff}, "==", 0.0)
        e = k.rate_emergency
        model.add_constraint(f"fl[{k.id}]", {fk: 1.0, s: -e}, ">=", -e)
        model.add_constraint(f"fu[{k.id}]", {fk: 1.0, s: e}, "<=", e)

    for n in case.buses:
        d = case.demand(n.id, t)
        terms = {f"pg[{g.id}]": 1.0 for g in case.generators_at_bus.get(n.id, ())}
        for k in case.branches:
            fk = f"fk[{k.id}]"
            if k.to_bus == n.id:
                terms[fk] = terms.get(fk, 0.0) + 1.0
            if k.from_bus == n.id:
                terms[fk] = terms.get(fk, 0.0) - 1.0
        terms[s] = d
        model.add_constraint(f"bal[{n.id}]", terms, "==", d)
    model.add_constraint("ref", {f"th[{case.reference_bus}]": 1.0}, "==", 0.0)


def _solve_slack_lp(model: Model, name: str):
    result = solve_lp(model)
    if result.status != "optimal":
        # the all-zeros redispatch with slack 1 is always feasible
        raise SolverError(f"{name} must always be solvable, engine says {result.status}")
    slack = result.value("s")
    if slack < -1e-9 or slack > 1.0 + 1e-6:
        raise SolverError(f"{name} slack {slack} escaped [0, 1]")
    gap = abs(result.dual_objective() - result.objective)
    if gap > DUALITY_CHECK_TOL:
        raise SolverError(f"{name} dual accounting off by {gap:.2e}")
    return result, max(slack, 0.0)


def solve_pcfc(case: SystemCase, muc: MucSolution, c: int, t: int,
               slack_tolerance: float = SLACK_TOLERANCE) -> SubproblemOutcome:
    """Redispatch feasibility check for one outage in one period.

    Minimizes a proportional slack over the 10-minute redispatch polytope of
    the given schedule with branch ``c`` out of service.  Slack zero means
    the outage is survivable; the returned duals support cut assembly and
    satisfy the rhs-weighted strong-duality identity to 1e-6.
    """
    model = Model(f"pcfc[{c},{t}]")
    _add_slack_lp(model, case, muc, c, t, removed=frozenset({c}))
    result, slack = _solve_slack_lp(model, model.name)

    duals = SubproblemDuals(
        ramp_down={g.id: result.dual(f"rd[{g.id}]") for g in case.generators},
        ramp_up={g.id: result.dual(f"ru[{g.id}]") for g in case.generators},
        output_min={g.id: result.dual(f"omin[{g.id}]") for g in case.generators},
        output_max={g.id: result.dual(f"omax[{g.id}]") for g in case.generators},
        flow_lower={k.id: result.dual(f"fl[{k.id}]") for k in case.branches},
        flow_upper={k.id: result.dual(f"fu[{k.id}]") for k in case.branches},
        flow_coupling={k.id: result.dual(f"fd[{k.id}]")
                       for k in case.branches if k.id != c},
        balance={n.id: result.dual(f"bal[{n.id}]") for n in case.buses},
    )
    status = "feasible" if slack <= slack_tolerance else "infeasible"
    return SubproblemOutcome(contingency=c, period=t, status=status,
                             slack=slack, duals=duals)


def solve_nr_pcfc(case: SystemCase, muc: MucSolution, c: int, t: int, j: int,
                  slack_tolerance: float = SLACK_TOLERANCE) -> SubproblemOutcome:
    """Feasibility check with branch ``c`` out and branch ``j`` switched open.

    The caller is responsible for checking that removing both branches keeps
    the network connected.  No duals are exposed; the outcome only records
    whether this reconfiguration rescues the schedule.
    """
    if j == c:
        raise ValueError("switch candidate must differ from the contingency")
    model = Model(f"nr_pcfc[{c},{t},{j}]")
    _add_slack_lp(model, case, muc, c, t, removed=frozenset({c, j}))
    _, slack = _solve_slack_lp(model, model.name)
    if slack <= slack_tolerance:
        return SubproblemOutcome(contingency=c, period=t, slack=slack,
                                 status="feasible_via_switch", switch=j)
    return SubproblemOutcome(contingency=c, period=t, slack=slack,
                             status="infeasible")


def find_corrective_switch(case: SystemCase, sens: NetworkSensitivities,
                           muc: MucSolution, c: int, t: int,
                           slack_tolerance: float = SLACK_TOLERANCE,
                           enumerate_all: bool = False,
                           counters: dict | None = None) -> tuple[int, float] | None:
    """First switching candidate that makes the outage survivable, if any.

    Candidates come from the ranked closest-branches list (or, in benchmark
    mode, the full reconfigurable set in id order) and are tried one at a
    time; candidates that would island a bus or are not reconfigurable are
    skipped without an LP solve.  Returns ``(branch, slack)`` for the first
    feasible candidate, or None when the list is exhausted.
    """
    reconfigurable = frozenset(
        k.id for k in case.branches if k.reconfigurable) & sens.non_radial
    if enumerate_all:
        candidates = sorted(reconfigurable - {c})
    else:
        candidates = [j for j in sens.cbce.get(c, ())]
    for j in candidates:
        if j not in reconfigurable:
            continue
        if not check_connectivity(case, {c, j}):
            continue
        outcome = solve_nr_pcfc(case, muc, c, t, j, slack_tolerance)
        if counters is not None:
            counters["nr_pcfc_solved"] = counters.get("nr_pcfc_solved", 0) + 1
        if outcome.status == "feasible_via_switch":
            return j, outcome.slack
    return None
