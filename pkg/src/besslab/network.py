"""Radial branch power flow and operational feasibility checks.

The solver is a forward/backward sweep fixed point over the recursive branch
flow equations: a backward pass accumulates branch flows including the
quadratic loss term, a forward pass updates squared voltage magnitudes from
the root. Quantities are per-unit internally; the dispatch layer talks kW and
converts through the network's base power.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class NonConvergence(Exception):
    """Sweep failed to reach the residual tolerance; the operating point is
    electrically infeasible (or pathological)."""


@dataclass(frozen=True, slots=True)
class NetworkNode:
    node_id: str
    p_demand_kw: float = 0.0
    q_demand_kvar: float = 0.0
    p_gen_kw: float = 0.0
    q_gen_kvar: float = 0.0


@dataclass(frozen=True, slots=True)
class Branch:
    from_id: str
    to_id: str
    r_pu: float
    x_pu: float
    ap_max_pu: float = float("inf")

    def __post_init__(self):
        if self.r_pu < 0.0 or self.x_pu < 0.0:
            raise ValueError("branch impedance must be nonnegative")


@dataclass(frozen=True, slots=True)
class RadialNetwork:
    nodes: tuple[NetworkNode, ...]
    branches: tuple[Branch, ...]
    root_id: str
    v_min_pu: float = 0.90
    v_max_pu: float = 1.10
    s_base_kva: float = 100.0
    v_root_pu: float = 1.0

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        if self.root_id not in ids:
            raise ValueError(f"root {self.root_id!r} not among nodes")
        if len(self.branches) != len(self.nodes) - 1:
            raise ValueError("a radial network needs exactly N-1 branches")
        if not self.v_min_pu < self.v_max_pu:
            raise ValueError("v_min must be below v_max")
        # every node reachable from the root through the branch tree
        adj: dict[str, list[str]] = {i: [] for i in ids}
        for b in self.branches:
            adj[b.from_id].append(b.to_id)
            adj[b.to_id].append(b.from_id)
        seen = {self.root_id}
        stack = [self.root_id]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != set(ids):
            raise ValueError("branch graph is not a tree rooted at the root node")

    def node(self, node_id: str) -> NetworkNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True, slots=True)
class GridLimits:
    p_pcc_min_kw: float
    p_pcc_max_kw: float
    p_dg_min_kw: float = 0.0
    p_dg_max_kw: float = float("inf")

    def __post_init__(self):
        if self.p_pcc_min_kw > self.p_pcc_max_kw:
            raise ValueError("p_pcc_min must not exceed p_pcc_max")


@dataclass(slots=True)
class FlowSolution:
    branch_p_pu: dict[tuple[str, str], float]
    branch_q_pu: dict[tuple[str, str], float]
    v_pu: dict[str, float]
    converged: bool
    residual: float
    sweeps: int


def pcc_power(p_sum_kw: float, p_b_kw: float) -> float:
    """Grid-side active power at the coupling point (import positive)."""
    return -(p_sum_kw + p_b_kw)


def _orient(net: RadialNetwork) -> tuple[list[tuple[str, str, Branch]], dict[str, list[tuple[str, Branch]]]]:
    """Orient branches away from the root; returns a BFS order of (parent,
    child, branch) and the children adjacency."""
    raw: dict[str, list[tuple[str, Branch]]] = {n.node_id: [] for n in net.nodes}
    for b in net.branches:
        raw[b.from_id].append((b.to_id, b))
        raw[b.to_id].append((b.from_id, b))
    order: list[tuple[str, str, Branch]] = []
    children: dict[str, list[tuple[str, Branch]]] = {n.node_id: [] for n in net.nodes}
    seen = {net.root_id}
    frontier = [net.root_id]
    while frontier:
        nxt: list[str] = []
        for parent in frontier:
            for child, br in raw[parent]:
                if child in seen:
                    continue
                seen.add(child)
                order.append((parent, child, br))
                children[parent].append((child, br))
                nxt.append(child)
        frontier = nxt
    return order, children


def _residual(net: RadialNetwork, order, children, p, q, v2) -> float:
    """Worst absolute mismatch of the branch flow equations at a candidate
    solution (node balances plus the voltage recursion)."""
    worst = 0.0
    for parent, child, br in order:
        node = net.node(child)
        loss_sq = (p[(parent, child)] ** 2 + q[(parent, child)] ** 2) / v2[parent]
        down_p = sum(p[(child, c)] for c, _ in children[child])
        down_q = sum(q[(child, c)] for c, _ in children[child])
        s_base = net.s_base_kva
        mism_p = p[(parent, child)] + node.p_gen_kw / s_base - br.r_pu * loss_sq - down_p - node.p_demand_kw / s_base
        mism_q = q[(parent, child)] + node.q_gen_kvar / s_base - br.x_pu * loss_sq - down_q - node.q_demand_kvar / s_base
        mism_v = v2[child] - (
            v2[parent]
            - 2.0 * (br.r_pu * p[(parent, child)] + br.x_pu * q[(parent, child)])
            + (br.r_pu**2 + br.x_pu**2) * loss_sq
        )
        worst = max(worst, abs(mism_p), abs(mism_q), abs(mism_v))
    return worst


def solve_distflow(net: RadialNetwork, tol: float = 1e-8, max_sweeps: int = 100) -> FlowSolution:
    """Fixed point of the backward (flow accumulation) / forward (voltage
    update) sweep. Raises NonConvergence after ``max_sweeps``."""
    order, children = _orient(net)
    p = {(a, b): 0.0 for a, b, _ in order}
    q = dict(p)
    v2 = {n.node_id: net.v_root_pu**2 for n in net.nodes}
    s_base = net.s_base_kva

    residual = float("inf")
    for sweep in range(1, max_sweeps + 1):
        # backward: flows from the leaves up, loss terms from the previous iterate
        for parent, child, br in reversed(order):
            node = net.node(child)
            loss_sq = (p[(parent, child)] ** 2 + q[(parent, child)] ** 2) / v2[parent]
            down_p = sum(p[(child, c)] for c, _ in children[child])
            down_q = sum(q[(child, c)] for c, _ in children[child])
            p[(parent, child)] = node.p_demand_kw / s_base - node.p_gen_kw / s_base + down_p + br.r_pu * loss_sq
            q[(parent, child)] = node.q_demand_kvar / s_base - node.q_gen_kvar / s_base + down_q + br.x_pu * loss_sq
        # forward: voltages from the root down
        for parent, child, br in order:
            loss_sq = (p[(parent, child)] ** 2 + q[(parent, child)] ** 2) / v2[parent]
            v2[child] = (
                v2[parent]
                - 2.0 * (br.r_pu * p[(parent, child)] + br.x_pu * q[(parent, child)])
                + (br.r_pu**2 + br.x_pu**2) * loss_sq
            )
            if v2[child] <= 0.0:
                raise NonConvergence(f"voltage collapse below node {child!r} after {sweep} sweeps")
        residual = _residual(net, order, children, p, q, v2)
        if residual < tol:
            return FlowSolution(
                branch_p_pu=p,
                branch_q_pu=q,
                v_pu={k: v**0.5 for k, v in v2.items()},
                converged=True,
                residual=residual,
                sweeps=sweep,
            )
    raise NonConvergence(f"residual {residual:.3e} above {tol:.1e} after {max_sweeps} sweeps")


@dataclass(frozen=True, slots=True)
class Violation:
    constraint: str
    where: str
    value: float
    bound: float


def check_operational(
    sol: FlowSolution,
    net: RadialNetwork,
    limits: GridLimits,
    p_pcc_kw: float,
    p_dg_kw: float,
    p_b_kw: float,
    batt,
) -> list[Violation]:
    """Collect every violated operating constraint; an empty list means the
    operating point is feasible. Infeasibility is data, not an error."""
    if not sol.converged:
        raise ValueError("feasibility check needs a converged flow solution")
    report: list[Violation] = []
    for node_id, v in sol.v_pu.items():
        if node_id == net.root_id:
            continue
        if v < net.v_min_pu:
            report.append(Violation("voltage_low", node_id, v, net.v_min_pu))
        elif v > net.v_max_pu:
            report.append(Violation("voltage_high", node_id, v, net.v_max_pu))
    branch_by_pair = {(b.from_id, b.to_id): b for b in net.branches}
    branch_by_pair.update({(b.to_id, b.from_id): b for b in net.branches})
    for pair, p in sol.branch_p_pu.items():
        br = branch_by_pair[pair]
        ap_sq = p**2 + sol.branch_q_pu[pair] ** 2
        if ap_sq > br.ap_max_pu**2:
            report.append(Violation("apparent_power", f"{pair[0]}-{pair[1]}", ap_sq**0.5, br.ap_max_pu))
    if not limits.p_dg_min_kw <= p_dg_kw <= limits.p_dg_max_kw:
        bound = limits.p_dg_min_kw if p_dg_kw < limits.p_dg_min_kw else limits.p_dg_max_kw
        report.append(Violation("dg_power", "dg", p_dg_kw, bound))
    if not batt.p_min_kw <= p_b_kw <= batt.p_max_kw:
        bound = batt.p_min_kw if p_b_kw < batt.p_min_kw else batt.p_max_kw
        report.append(Violation("battery_power", "bess", p_b_kw, bound))
    if not limits.p_pcc_min_kw <= p_pcc_kw <= limits.p_pcc_max_kw:
        bound = limits.p_pcc_min_kw if p_pcc_kw < limits.p_pcc_min_kw else limits.p_pcc_max_kw
        report.append(Violation("pcc_power", "pcc", p_pcc_kw, bound))
    return report
