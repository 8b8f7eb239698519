"""Graph and DC-sensitivity analysis for a system case.

Provides bridge classification (which fixes the contingency set to the
non-radial branches), the injection-to-flow PTDF matrix, the line outage
distribution factors derived from it, connectivity checks used to guard
switching actions, and the ranked candidate list of branches closest to a
contingency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import SystemCase

RADIAL_DENOMINATOR_TOL = 1e-8

DEFAULT_CBCE_SIZE = 20


def _adjacency(case: SystemCase, removed: frozenset[int] = frozenset()) -> dict[int, list[tuple[int, int]]]:
    adj: dict[int, list[tuple[int, int]]] = {b.id: [] for b in case.buses}
    for k in case.branches:
        if k.id in removed:
            continue
        adj[k.from_bus].append((k.id, k.to_bus))
        adj[k.to_bus].append((k.id, k.from_bus))
    return adj


def check_connectivity(case: SystemCase, removed: set[int] | frozenset[int] = frozenset()) -> bool:
    """True iff all buses stay in one component after removing the given branches."""
    adj = _adjacency(case, frozenset(removed))
    start = case.buses[0].id
    seen = {start}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for _, m in adj[n]:
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return len(seen) == len(case.buses)


def classify_radial(case: SystemCase) -> tuple[frozenset[int], frozenset[int]]:
    """Split branches into bridges and non-radial (on-cycle) branches.

    A branch is a bridge iff its removal disconnects the network.  Parallel
    branches between the same bus pair are never bridges: the DFS skips only
    the tree edge itself, by branch id, so a parallel twin acts as a back
    edge.
    """
    if not check_connectivity(case):
        raise ValueError("classify_radial requires a connected case")

    adj = _adjacency(case)
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    bridges: set[int] = set()
    counter = 0

    root = case.buses[0].id
    # Iterative DFS; each stack frame tracks the edge used to enter the node.
    stack: list[tuple[int, int | None]] = [(root, None)]
    iterators = {root: iter(adj[root])}
    disc[root] = low[root] = counter
    counter += 1
    while stack:
        node, entry_edge = stack[-1]
        advanced = False
        for edge_id, nbr in iterators[node]:
            if edge_id == entry_edge:
                continue
            if nbr not in disc:
                disc[nbr] = low[nbr] = counter
                counter += 1
                iterators[nbr] = iter(adj[nbr])
                stack.append((nbr, edge_id))
                advanced = True
                break
            low[node] = min(low[node], disc[nbr])
        if not advanced:
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridges.add(entry_edge)

    non_radial = frozenset(k.id for k in case.branches) - bridges
    return frozenset(bridges), frozenset(non_radial)


def compute_ptdf(case: SystemCase, reference_bus: int | None = None) -> np.ndarray:
    """Injection sensitivities: MW on each branch per MW injected at each bus.

    Row order follows ``case.branches``, column order ``case.buses``.  Column
    ``n`` gives the flow change for 1 MW injected at bus ``n`` and withdrawn
    at the reference; the reference column is identically zero.
    """
    if not check_connectivity(case):
        raise ValueError("compute_ptdf requires a connected case")
    ref = case.reference_bus if reference_bus is None else reference_bus
    n_bus = len(case.buses)
    n_br = len(case.branches)
    bus_pos = case.bus_index

    incidence = np.zeros((n_br, n_bus))
    beff = np.zeros(n_br)
    for i, k in enumerate(case.branches):
        incidence[i, bus_pos[k.from_bus]] = 1.0
        incidence[i, bus_pos[k.to_bus]] = -1.0
        beff[i] = k.susceptance * case.base_mva

    laplacian = incidence.T @ (beff[:, None] * incidence)
    keep = [i for i in range(n_bus) if i != bus_pos[ref]]
    reduced = laplacian[np.ix_(keep, keep)]
    try:
        theta_sens = np.linalg.solve(reduced, np.eye(len(keep)))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular susceptance matrix: {exc}") from None

    ptdf = np.zeros((n_br, n_bus))
    ptdf[:, keep] = (beff[:, None] * incidence[:, keep]) @ theta_sens
    return ptdf


def compute_lodf(case: SystemCase, ptdf: np.ndarray,
                 non_radial: frozenset[int]) -> np.ndarray:
    """Line outage distribution factors for every non-radial outage.

    Returns a dense branches-by-branches matrix; column ``c`` predicts the
    flow change on each monitored branch per MW of pre-outage flow on ``c``.
    Columns for bridges are NaN (a bridge outage islands the network and has
    no distribution factor).  The diagonal of every valid column is -1.
    """
    bus_pos = case.bus_index
    br_pos = case.branch_index
    n_br = len(case.branches)
    lodf = np.full((n_br, n_br), np.nan)
    # Flow sensitivity to a unit transfer across each branch's own terminals.
    transfer = np.zeros((n_br, n_br))
    for j, k in enumerate(case.branches):
        transfer[:, j] = ptdf[:, bus_pos[k.from_bus]] - ptdf[:, bus_pos[k.to_bus]]

    for k in case.branches:
        c = br_pos[k.id]
        if k.id not in non_radial:
            continue
        denom = 1.0 - transfer[c, c]
        if abs(denom) < RADIAL_DENOMINATOR_TOL:
            raise ValueError(
                f"branch {k.id} is numerically radial (1 - self-sensitivity = {denom:.2e}) "
                "but was not classified as a bridge; check the case data")
        lodf[:, c] = transfer[:, c] / denom
        lodf[c, c] = -1.0
    return lodf


def rank_cbce(case: SystemCase, contingency: int, size: int = DEFAULT_CBCE_SIZE,
              bridges: frozenset[int] | None = None) -> list[int]:
    """Candidate switching branches nearest to a contingency, closest first.

    Candidates are the non-radial branches other than the contingency,
    scored by the minimum bus-hop distance from either of their endpoints to
    either endpoint of the contingency (0 = shares a bus).  Ties break by
    ascending branch id; the list is truncated to ``size``.
    """
    if bridges is None:
        bridges, _ = classify_radial(case)
    if contingency in bridges:
        raise ValueError(f"branch {contingency} is a bridge and not a valid contingency")
    if size <= 0:
        return []

    target = case.branch(contingency)
    dist: dict[int, float] = {b.id: np.inf for b in case.buses}
    queue = deque()
    for src in (target.from_bus, target.to_bus):
        dist[src] = 0
        queue.append(src)
    adj = _adjacency(case)
    while queue:
        n = queue.popleft()
        for _, m in adj[n]:
            if dist[m] == np.inf:
                dist[m] = dist[n] + 1
                queue.append(m)

    scored = []
    for k in case.branches:
        if k.id == contingency or k.id in bridges:
            continue
        score = min(dist[k.from_bus], dist[k.to_bus])
        scored.append((score, k.id))
    scored.sort()
    return [kid for _, kid in scored[:size]]


@dataclass(frozen=True)
class NetworkSensitivities:
    """Precomputed topology/sensitivity bundle, shared read-only by workers."""

    bus_ids: tuple[int, ...]
    branch_ids: tuple[int, ...]
    bridges: frozenset[int]
    non_radial: frozenset[int]
    ptdf: np.ndarray
    lodf: np.ndarray
    cbce: dict[int, tuple[int, ...]]
    cbce_size: int

    def __post_init__(self):
        self.ptdf.setflags(write=False)
        self.lodf.setflags(write=False)

    @cached_property
    def _branch_pos(self) -> dict[int, int]:
        return {k: i for i, k in enumerate(self.branch_ids)}

    @cached_property
    def _bus_pos(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.bus_ids)}

    def lodf_factor(self, monitored: int, outaged: int) -> float:
        return float(self.lodf[self._branch_pos[monitored], self._branch_pos[outaged]])

    def ptdf_factor(self, branch: int, bus: int) -> float:
        return float(self.ptdf[self._branch_pos[branch], self._bus_pos[bus]])

    @property
    def contingencies(self) -> list[int]:
        return sorted(self.non_radial)


def build_sensitivities(case: SystemCase, cbce_size: int = DEFAULT_CBCE_SIZE) -> NetworkSensitivities:
    bridges, non_radial = classify_radial(case)
    ptdf = compute_ptdf(case)
    lodf = compute_lodf(case, ptdf, non_radial)
    cbce = {c: tuple(rank_cbce(case, c, cbce_size, bridges))
            for c in sorted(non_radial)}
    return NetworkSensitivities(
        bus_ids=tuple(b.id for b in case.buses),
        branch_ids=tuple(k.id for k in case.branches),
        bridges=bridges,
        non_radial=non_radial,
        ptdf=ptdf,
        lodf=lodf,
        cbce=cbce,
        cbce_size=cbce_size,
    )
