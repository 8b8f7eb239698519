"""LP/MILP solving on top of the HiGHS engines bundled with scipy.

Models are assembled row by row with named constraints.  Results expose
primal values and, for pure LPs, one dual value per row.  Duals are
normalised so that ``sum(rhs * dual)`` over all rows equals the optimal
objective of the minimisation problem, regardless of the engine's native
sign convention.  To keep that identity closed over rows alone, the LP
path converts finite variable bounds into explicit rows (named
``_lb[var]`` / ``_ub[var]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

INF = math.inf

SENSES = ("<=", ">=", "==")

DEFAULT_MILP_GAP = 1e-4
DEFAULT_LP_FEASIBILITY_TOL = 1e-7

_STATUS_MAP = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}


class SolverError(RuntimeError):
    """Engine-level failure (numerical trouble, unexpected status)."""


@dataclass
class _Variable:
    name: str
    lb: float
    ub: float
    cost: float
    binary: bool


@dataclass
class _Row:
    name: str
    terms: dict[int, float]
    sense: str
    rhs: float


class Model:
    """A linear model under construction: variables, named rows, min objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._vars: list[_Variable] = []
        self._var_index: dict[str, int] = {}
        self._rows: list[_Row] = []
        self._row_index: dict[str, int] = {}

    def add_variable(self, name: str, lb: float = -INF, ub: float = INF,
                     cost: float = 0.0, binary: bool = False) -> str:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if binary:
            lb, ub = 0.0, 1.0
        if lb > ub:
            raise ValueError(f"variable {name!r} has empty bound range [{lb}, {ub}]")
        self._var_index[name] = len(self._vars)
        self._vars.append(_Variable(name, lb, ub, cost, binary))
        return name

    def add_constraint(self, name: str, terms: dict[str, float], sense: str,
                       rhs: float) -> str:
        if name in self._row_index:
            raise ValueError(f"duplicate constraint name {name!r}")
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        indexed: dict[int, float] = {}
        for var, coef in terms.items():
            if var not in self._var_index:
                raise ValueError(f"constraint {name!r} references unknown variable {var!r}")
            if coef != 0.0:
                indexed[self._var_index[var]] = indexed.get(self._var_index[var], 0.0) + coef
        self._row_index[name] = len(self._rows)
        self._rows.append(_Row(name, indexed, sense, float(rhs)))
        return name

    @property
    def variable_names(self) -> list[str]:
        return [v.name for v in self._vars]

    @property
    def num_variables(self) -> int:
        return len(self._vars)

    @property
    def num_constraints(self) -> int:
        return len(self._rows)

    @property
    def has_binaries(self) -> bool:
        return any(v.binary for v in self._vars)


@dataclass
class SolveResult:
    """Outcome of one solve.

    ``duals`` is present only when the solved model had no binaries; it maps
    row name to the normalised dual value.  ``row_rhs`` carries the
    right-hand sides used in the solve (including synthesised bound rows in
    LP mode) so the dual objective can be recomputed exactly.
    """

    status: str
    objective: float | None
    values: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] | None = None
    mip_gap: float | None = None
    row_rhs: dict[str, float] = field(default_factory=dict)

    def value(self, name: str) -> float:
        return self.values[name]

    def dual(self, name: str) -> float:
        if self.duals is None:
            raise ValueError("duals are only available for LP solves")
        return self.duals[name]

    def dual_objective(self) -> float:
        """Sum of rhs * dual over every row; equals the LP optimum."""
        if self.duals is None:
            raise ValueError("duals are only available for LP solves")
        return sum(self.row_rhs[name] * d for name, d in self.duals.items())


def _coo(rows: list[_Row], n_vars: int, selector) -> tuple[sp.csr_matrix, np.ndarray, list[_Row]]:
    data, ri, ci, rhs, picked = [], [], [], [], []
    r = 0
    for row in rows:
        sign = selector(row)
        if sign is None:
            continue
        for col, coef in row.terms.items():
            ri.append(r)
            ci.append(col)
            data.append(sign * coef)
        rhs.append(sign * row.rhs)
        picked.append(row)
        r += 1
    mat = sp.csr_matrix((data, (ri, ci)), shape=(r, n_vars))
    return mat, np.asarray(rhs, dtype=float), picked


def solve_lp(model: Model, feasibility_tol: float = DEFAULT_LP_FEASIBILITY_TOL,
             time_limit: float | None = None) -> SolveResult:
    """Solve a pure LP and return primal values plus normalised row duals."""
    if model.has_binaries:
        raise ValueError("solve_lp requires a model without binary variables")

    rows = list(model._rows)
    # Finite bounds become rows so that row duals alone close the duality gap.
    for v in model._vars:
        if v.lb > -INF:
            rows.append(_Row(f"_lb[{v.name}]", {model._var_index[v.name]: 1.0}, ">=", v.lb))
        if v.ub < INF:
            rows.append(_Row(f"_ub[{v.name}]", {model._var_index[v.name]: 1.0}, "<=", v.ub))

    n = model.num_variables
    a_ub, b_ub, ub_rows = _coo(
        rows, n, lambda r: 1.0 if r.sense == "<=" else (-1.0 if r.sense == ">=" else None))
    a_eq, b_eq, eq_rows = _coo(rows, n, lambda r: 1.0 if r.sense == "==" else None)

    cost = np.array([v.cost for v in model._vars], dtype=float)
    options = {
        "primal_feasibility_tolerance": feasibility_tol,
        "dual_feasibility_tolerance": feasibility_tol,
    }
    if time_limit is not None:
        options["time_limit"] = float(time_limit)

    res = linprog(
        c=cost,
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        bounds=[(None, None)] * n,
        method="highs",
        options=options,
    )
    if res.status not in _STATUS_MAP:
        raise SolverError(f"LP engine failure on {model.name!r}: {res.message}")
    status = _STATUS_MAP[res.status]

    values: dict[str, float] = {}
    duals: dict[str, float] | None = None
    rhs_map: dict[str, float] = {}
    objective = None
    if status == "optimal":
        objective = float(res.fun)
        values = {v.name: float(x) for v, x in zip(model._vars, res.x)}
        duals = {}
        # ">=" rows were shipped negated; flip dual and rhs back so that
        # rhs * dual contributes in the original orientation.
        for row, marg in zip(ub_rows, res.ineqlin.marginals):
            if row.sense == ">=":
                duals[row.name] = -float(marg)
            else:
                duals[row.name] = float(marg)
            rhs_map[row.name] = row.rhs
        for row, marg in zip(eq_rows, res.eqlin.marginals):
            duals[row.name] = float(marg)
            rhs_map[row.name] = row.rhs
    return SolveResult(status=status, objective=objective, values=values,
                       duals=duals, mip_gap=None, row_rhs=rhs_map)


def solve_milp(model: Model, gap: float = DEFAULT_MILP_GAP,
               time_limit: float | None = None) -> SolveResult:
    """Solve a MILP; binary-free models fall through to the LP path (with duals)."""
    if not model.has_binaries:
        return solve_lp(model, time_limit=time_limit)

    n = model.num_variables
    cost = np.array([v.cost for v in model._vars], dtype=float)
    lb = np.array([v.lb for v in model._vars], dtype=float)
    ub = np.array([v.ub for v in model._vars], dtype=float)
    integrality = np.array([1 if v.binary else 0 for v in model._vars], dtype=int)

    constraints = []
    if model._rows:
        data, ri, ci, lo, hi = [], [], [], [], []
        for r, row in enumerate(model._rows):
            for col, coef in row.terms.items():
                ri.append(r)
                ci.append(col)
                data.append(coef)
            if row.sense == "<=":
                lo.append(-INF)
                hi.append(row.rhs)
            elif row.sense == ">=":
                lo.append(row.rhs)
                hi.append(INF)
            else:
                lo.append(row.rhs)
                hi.append(row.rhs)
        mat = sp.csr_matrix((data, (ri, ci)), shape=(len(model._rows), n))
        constraints.append(LinearConstraint(mat, lo, hi))

    options: dict[str, object] = {"mip_rel_gap": float(gap)}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)

    res = milp(c=cost, constraints=constraints, integrality=integrality,
               bounds=Bounds(lb, ub), options=options)
    if res.status not in _STATUS_MAP:
        raise SolverError(f"MILP engine failure on {model.name!r}: {res.message}")
    status = _STATUS_MAP[res.status]

    values: dict[str, float] = {}
    objective = None
    if res.x is not None:
        objective = float(res.fun)
        values = {v.name: float(x) for v, x in zip(model._vars, res.x)}
    elif status == "optimal":
        raise SolverError(f"MILP engine returned optimal without a solution on {model.name!r}")
    gap_out = getattr(res, "mip_gap", None)
    return SolveResult(status=status, objective=objective, values=values,
                       duals=None, mip_gap=None if gap_out is None else float(gap_out),
                       row_rhs={row.name: row.rhs for row in model._rows})
