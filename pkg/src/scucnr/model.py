"""Domain types for the power-system instance and solution artifacts.

All quantities are in MW and hours except branch susceptance (per-unit on
``base_mva``) and bus angles (radians).  Instances are frozen after
construction and safe to share across worker threads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

SLACK_TOLERANCE = 1e-6

OUTCOME_STATUSES = ("screened_out", "feasible", "feasible_via_switch", "infeasible")


@dataclass(frozen=True)
class Bus:
    id: int
    demand: tuple[float, ...]
    is_reference: bool = False


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    rate_long_term: float
    rate_emergency: float
    reconfigurable: bool = True


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost_linear: float
    cost_no_load: float
    cost_startup: float
    ramp_hourly: float
    ramp_startup: float
    ramp_shutdown: float
    ramp_10: float
    min_up: int = 1
    min_down: int = 1
    initial_status: bool = False
    initial_output: float = 0.0


@dataclass(frozen=True)
class SystemCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    horizon: int
    base_mva: float = 100.0

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def branch_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.branches)}

    @cached_property
    def generator_index(self) -> dict[int, int]:
        return {g.id: i for i, g in enumerate(self.generators)}

    @cached_property
    def generators_at_bus(self) -> dict[int, tuple[Generator, ...]]:
        out: dict[int, list[Generator]] = {b.id: [] for b in self.buses}
        for g in self.generators:
            out.setdefault(g.bus, []).append(g)
        return {n: tuple(gs) for n, gs in out.items()}

    @cached_property
    def reference_bus(self) -> int:
        refs = [b.id for b in self.buses if b.is_reference]
        if len(refs) != 1:
            raise ValueError(f"case must have exactly one reference bus, found {len(refs)}")
        return refs[0]

    def branch(self, branch_id: int) -> Branch:
        return self.branches[self.branch_index[branch_id]]

    def generator(self, gen_id: int) -> Generator:
        return self.generators[self.generator_index[gen_id]]

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def demand(self, bus_id: int, t: int) -> float:
        """Demand at ``bus_id`` in period ``t`` (1-based)."""
        return self.bus(bus_id).demand[t - 1]

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)


@dataclass(frozen=True)
class Violation:
    kind: str
    entity: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.entity}: {self.message}"


ValidationReport = list


def _connected_components(bus_ids, edges) -> list[set[int]]:
    adjacency: dict[int, list[int]] = {n: [] for n in bus_ids}
    for frm, to in edges:
        adjacency[frm].append(to)
        adjacency[to].append(frm)
    seen: set[int] = set()
    comps = []
    for start in bus_ids:
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            n = queue.popleft()
            for m in adjacency[n]:
                if m not in comp:
                    comp.add(m)
                    queue.append(m)
        seen |= comp
        comps.append(comp)
    return comps


def validate_case(case: SystemCase) -> list[Violation]:
    """Check every structural invariant; returns an empty list for a valid case."""
    issues: list[Violation] = []

    def add(kind, entity, message):
        issues.append(Violation(kind, entity, message))

    if case.horizon < 1:
        add("horizon", "case", f"horizon must be >= 1, got {case.horizon}")
    if case.base_mva <= 0:
        add("base_mva", "case", f"base_mva must be positive, got {case.base_mva}")

    for coll, name in ((case.buses, "bus"), (case.branches, "branch"),
                       (case.generators, "generator")):
        seen: set[int] = set()
        for item in coll:
            if item.id in seen:
                add("duplicate_id", f"{name} {item.id}", "id appears more than once")
            seen.add(item.id)

    refs = [b.id for b in case.buses if b.is_reference]
    if len(refs) != 1:
        add("reference", "case", f"exactly one reference bus required, found {len(refs)}")

    bus_ids = {b.id for b in case.buses}
    for b in case.buses:
        if len(b.demand) != case.horizon:
            add("demand_length", f"bus {b.id}",
                f"demand array has length {len(b.demand)}, expected horizon {case.horizon}")
        if any(d < 0 for d in b.demand):
            add("demand_sign", f"bus {b.id}", "demand values must be >= 0")

    for k in case.branches:
        if k.from_bus == k.to_bus:
            add("self_loop", f"branch {k.id}", "from_bus equals to_bus")
        for end in (k.from_bus, k.to_bus):
            if end not in bus_ids:
                add("missing_bus", f"branch {k.id}", f"references nonexistent bus {end}")
        if k.susceptance <= 0:
            add("susceptance", f"branch {k.id}",
                f"susceptance must be > 0, got {k.susceptance}")
        if k.rate_long_term <= 0:
            add("rating", f"branch {k.id}",
                f"rate_long_term must be > 0, got {k.rate_long_term}")
        if k.rate_emergency < k.rate_long_term:
            add("rating", f"branch {k.id}",
                f"rate_emergency {k.rate_emergency} is below rate_long_term "
                f"{k.rate_long_term}")

    for g in case.generators:
        if g.bus not in bus_ids:
            add("missing_bus", f"generator {g.id}", f"references nonexistent bus {g.bus}")
        if not (0 <= g.p_min <= g.p_max):
            add("capacity", f"generator {g.id}",
                f"need 0 <= p_min <= p_max, got [{g.p_min}, {g.p_max}]")
        for label, val in (("ramp_hourly", g.ramp_hourly), ("ramp_startup", g.ramp_startup),
                           ("ramp_shutdown", g.ramp_shutdown), ("ramp_10", g.ramp_10)):
            if val < 0:
                add("ramp", f"generator {g.id}", f"{label} must be >= 0, got {val}")
        if g.min_up < 1 or g.min_down < 1:
            add("min_time", f"generator {g.id}",
                f"min_up/min_down must be >= 1, got {g.min_up}/{g.min_down}")
        if g.initial_status:
            if not (g.p_min <= g.initial_output <= g.p_max):
                add("initial_output", f"generator {g.id}",
                    f"initial_output {g.initial_output} outside [{g.p_min}, {g.p_max}]")
        elif g.initial_output != 0:
            add("initial_output", f"generator {g.id}",
                "offline unit must have initial_output 0")

    valid_edges = [(k.from_bus, k.to_bus) for k in case.branches
                   if k.from_bus in bus_ids and k.to_bus in bus_ids and k.from_bus != k.to_bus]
    comps = _connected_components(sorted(bus_ids), valid_edges)
    if len(comps) > 1:
        isolated = sorted(min(comps[1:], key=len)) if len(comps) > 1 else []
        add("connectivity", "case",
            f"network splits into {len(comps)} components; e.g. buses {isolated} "
            "are separated from the rest")

    return issues


@dataclass(frozen=True)
class MucSolution:
    """Commitment/dispatch schedule produced by a master or extensive solve.

    Arrays are indexed ``[entity_position, t - 1]`` following the id tuples.
    """

    generator_ids: tuple[int, ...]
    branch_ids: tuple[int, ...]
    bus_ids: tuple[int, ...]
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    r: np.ndarray
    flow: np.ndarray
    theta: np.ndarray
    objective: float

    def __post_init__(self):
        for arr in (self.u, self.v, self.p, self.r, self.flow, self.theta):
            arr.setflags(write=False)

    @cached_property
    def _gen_pos(self) -> dict[int, int]:
        return {g: i for i, g in enumerate(self.generator_ids)}

    @cached_property
    def _branch_pos(self) -> dict[int, int]:
        return {k: i for i, k in enumerate(self.branch_ids)}

    @cached_property
    def _bus_pos(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.bus_ids)}

    def commitment(self, gen_id: int, t: int) -> int:
        return int(self.u[self._gen_pos[gen_id], t - 1])

    def startup(self, gen_id: int, t: int) -> int:
        return int(self.v[self._gen_pos[gen_id], t - 1])

    def dispatch(self, gen_id: int, t: int) -> float:
        return float(self.p[self._gen_pos[gen_id], t - 1])

    def reserve(self, gen_id: int, t: int) -> float:
        return float(self.r[self._gen_pos[gen_id], t - 1])

    def branch_flow(self, branch_id: int, t: int) -> float:
        return float(self.flow[self._branch_pos[branch_id], t - 1])

    def angle(self, bus_id: int, t: int) -> float:
        return float(self.theta[self._bus_pos[bus_id], t - 1])


def solution_invariant_violations(case: SystemCase, sol: MucSolution,
                                  tol: float = 1e-6) -> list[str]:
    """Sanity checks a schedule must satisfy before it is used downstream."""
    problems: list[str] = []
    for gi, gid in enumerate(sol.generator_ids):
        g = case.generator(gid)
        prev = 1 if g.initial_status else 0
        for t in case.periods:
            u, v = sol.u[gi, t - 1], sol.v[gi, t - 1]
            if v < u - prev - tol:
                problems.append(f"generator {gid} t={t}: startup indicator below u change")
            r = sol.r[gi, t - 1]
            if r < -tol or r > g.ramp_10 * u + tol:
                problems.append(f"generator {gid} t={t}: reserve {r} outside [0, R10*u]")
            prev = u
    for ki, kid in enumerate(sol.branch_ids):
        k = case.branch(kid)
        for t in case.periods:
            if abs(sol.flow[ki, t - 1]) > k.rate_long_term + tol:
                problems.append(f"branch {kid} t={t}: base flow exceeds long-term rating")
    ref_pos = sol._bus_pos[case.reference_bus]
    for t in case.periods:
        if abs(sol.theta[ref_pos, t - 1]) > tol:
            problems.append(f"t={t}: reference angle not pinned to zero")
    return problems


def power_balance_residuals(case: SystemCase, sol: MucSolution) -> np.ndarray:
    """Per-(bus, period) residual of generation + net inflow - demand, MW."""
    n_bus = len(sol.bus_ids)
    res = np.zeros((n_bus, case.horizon))
    for ni, nid in enumerate(sol.bus_ids):
        for t in case.periods:
            res[ni, t - 1] -= case.demand(nid, t)
    for gi, gid in enumerate(sol.generator_ids):
        ni = sol._bus_pos[case.generator(gid).bus]
        res[ni, :] += sol.p[gi, :]
    for ki, kid in enumerate(sol.branch_ids):
        k = case.branch(kid)
        res[sol._bus_pos[k.to_bus], :] += sol.flow[ki, :]
        res[sol._bus_pos[k.from_bus], :] -= sol.flow[ki, :]
    return res


def operating_cost(case: SystemCase, u: np.ndarray, v: np.ndarray, p: np.ndarray,
                   generator_ids: tuple[int, ...]) -> float:
    """Total cost of a schedule: energy plus no-load plus start-up."""
    total = 0.0
    for gi, gid in enumerate(generator_ids):
        g = case.generator(gid)
        total += float(np.sum(g.cost_linear * p[gi, :]
                              + g.cost_no_load * u[gi, :]
                              + g.cost_startup * v[gi, :]))
    return total


@dataclass(frozen=True)
class SubproblemDuals:
    """Row duals of one post-contingency feasibility LP.

    Values use the backend's normalised convention: summing rhs * dual over
    the LP's rows reproduces the slack optimum exactly, so the feasibility
    cut assembled from these numbers evaluates to the slack at the schedule
    that produced it.
    """

    ramp_down: dict[int, float]     # per generator: contingency output floor
    ramp_up: dict[int, float]       # per generator: contingency output ceiling
    output_min: dict[int, float]    # per generator: committed minimum
    output_max: dict[int, float]    # per generator: committed maximum
    flow_lower: dict[int, float]    # per branch: negative emergency limit
    flow_upper: dict[int, float]    # per branch: positive emergency limit
    flow_coupling: dict[int, float]  # per in-service branch: flow definition
    balance: dict[int, float]       # per bus: nodal balance


@dataclass(frozen=True)
class SubproblemOutcome:
    contingency: int
    period: int
    status: str
    slack: float
    duals: SubproblemDuals | None = None
    switch: int | None = None

    def __post_init__(self):
        if self.status not in OUTCOME_STATUSES:
            raise ValueError(f"unknown outcome status {self.status!r}")
        if self.switch is not None and self.status != "feasible_via_switch":
            raise ValueError("a recorded switch requires status feasible_via_switch")
        if self.slack < 0:
            raise ValueError("slack must be >= 0")


@dataclass(frozen=True)
class FeasibilityCut:
    """Linear inequality over master variables u[g,t], p[g,t] of one period.

    The master must keep ``sum(coef_u * u) + sum(coef_p * p) + constant <= 0``.
    """

    contingency: int
    period: int
    coef_u: dict[int, float]
    coef_p: dict[int, float]
    constant: float

    def evaluate(self, u: dict[int, float], p: dict[int, float]) -> float:
        val = self.constant
        val += sum(c * u[g] for g, c in self.coef_u.items())
        val += sum(c * p[g] for g, c in self.coef_p.items())
        return val

    def evaluate_solution(self, sol: MucSolution) -> float:
        t = self.period
        u = {g: sol.commitment(g, t) for g in self.coef_u}
        p = {g: sol.dispatch(g, t) for g in self.coef_p}
        return self.evaluate(u, p)

    def same_coefficients(self, other: "FeasibilityCut", tol: float = 1e-9) -> bool:
        if (self.contingency, self.period) != (other.contingency, other.period):
            return False
        keys = set(self.coef_u) | set(other.coef_u) | set(self.coef_p) | set(other.coef_p)
        for g in keys:
            if abs(self.coef_u.get(g, 0.0) - other.coef_u.get(g, 0.0)) > tol:
                return False
            if abs(self.coef_p.get(g, 0.0) - other.coef_p.get(g, 0.0)) > tol:
                return False
        return abs(self.constant - other.constant) <= tol
