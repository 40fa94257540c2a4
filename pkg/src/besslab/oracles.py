"""Independent oracles backing the test suite.

Everything here recomputes results through arithmetic paths separate from the
implementations under test: exhaustive enumeration instead of tree search,
direct equation substitution instead of the sweep solver's bookkeeping, and
closed-form truncated-normal moments instead of sampling. Production code
never imports this module.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

from .env import DispatchState, Exogenous
from .network import FlowSolution, RadialNetwork
from .rules import EmptyFeasibleSet
from .scenarios import ScenarioTrajectory
from .system import DispatchSystem


class TooLarge(Exception):
    """Enumeration would exceed the desk-scale guard."""


ENUMERATION_GUARD = 10**7


@dataclass(frozen=True, slots=True)
class OracleReport:
    case_id: str
    oracle_value: float
    subject_value: float
    tolerance: float

    @property
    def abs_error(self) -> float:
        return abs(self.subject_value - self.oracle_value)

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.oracle_value), 1e-300)
        return self.abs_error / scale

    @property
    def passed(self) -> bool:
        return self.rel_error <= self.tolerance


def append_report(path: str, report: OracleReport) -> None:
    """Audit-trail row for a checked case."""
    write_header = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(["case_id", "oracle_value", "subject_value", "abs_error", "rel_error", "pass"])
        writer.writerow(
            [report.case_id, repr(report.oracle_value), repr(report.subject_value),
             repr(report.abs_error), repr(report.rel_error), int(report.passed)]
        )


def enumerate_optimum(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    scenarios: list[ScenarioTrajectory],
    exo: tuple[Exogenous, ...],
    horizon: int,
    gamma: float,
    dead_end_step_penalty: float = -1.0e4,
) -> float:
    """Exact expected maximum action value by full enumeration.

    Mirrors the search's semantics (same feasibility fallback, same dead-end
    penalty) but walks every feasible action sequence of every scenario.
    """
    branching = len(system.actions)
    if branching ** max(horizon - 1, 0) * len(scenarios) > ENUMERATION_GUARD:
        raise TooLarge("sequence space exceeds the enumeration guard")

    def best_from(s: DispatchState, depth: int, ref_pcc: float, values: tuple[float, ...]) -> float:
        if depth >= horizon:
            return 0.0
        try:
            acts = system.action_filter(s, values[depth], ref_pcc)
        except EmptyFeasibleSet:
            return dead_end_step_penalty * (horizon - depth)
        best = -math.inf
        for a in acts:
            succ = system.transition(s, a, values[depth], exo[depth])
            tail = best_from(succ, depth + 1, system.realized_pcc(succ, a), values)
            best = max(best, system.reward(s, a) + gamma * tail)
        return best

    total = 0.0
    for scen in scenarios:
        values = scen.values_kw
        if len(values) < horizon:
            raise ValueError("scenario shorter than the horizon")
        first = system.reward(state, action_kw)
        if horizon == 1:
            total += first
            continue
        root = system.transition(state, action_kw, values[0], exo[0])
        tail = best_from(root, 1, system.realized_pcc(root, action_kw), values)
        total += first + gamma * tail
    return total / len(scenarios)


def sweep_residual(net: RadialNetwork, sol: FlowSolution) -> float:
    """Worst absolute mismatch of the branch flow equations at a candidate
    solution, by direct substitution (independent of the solver)."""
    children: dict[str, list[str]] = {n.node_id: [] for n in net.nodes}
    parent_of: dict[str, tuple[str, object]] = {}
    pending = {(b.from_id, b.to_id): b for b in net.branches}
    frontier = [net.root_id]
    while frontier:
        nxt = []
        for node_id in frontier:
            for (a, b), br in list(pending.items()):
                if a == node_id:
                    children[a].append(b)
                    parent_of[b] = (a, br)
                    del pending[(a, b)]
                    nxt.append(b)
                elif b == node_id:
                    children[b].append(a)
                    parent_of[a] = (b, br)
                    del pending[(a, b)]
                    nxt.append(a)
        frontier = nxt

    v2 = {k: v * v for k, v in sol.v_pu.items()}
    worst = 0.0
    for node in net.nodes:
        j = node.node_id
        if j == net.root_id:
            continue
        i, br = parent_of[j]
        p_ij = sol.branch_p_pu[(i, j)]
        q_ij = sol.branch_q_pu[(i, j)]
        flow_sq = (p_ij * p_ij + q_ij * q_ij) / v2[i]
        down_p = sum(sol.branch_p_pu[(j, c)] for c in children[j])
        down_q = sum(sol.branch_q_pu[(j, c)] for c in children[j])
        s_base = net.s_base_kva
        active = p_ij + node.p_gen_kw / s_base - br.r_pu * flow_sq - down_p - node.p_demand_kw / s_base
        reactive = q_ij + node.q_gen_kvar / s_base - br.x_pu * flow_sq - down_q - node.q_demand_kvar / s_base
        voltage = v2[j] - v2[i] + 2.0 * (br.r_pu * p_ij + br.x_pu * q_ij) - (br.r_pu**2 + br.x_pu**2) * flow_sq
        worst = max(worst, abs(active), abs(reactive), abs(voltage))
    return worst


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def truncnorm_moments(mean: float, variance: float, lower: float, upper: float) -> tuple[float, float]:
    """Closed-form first two moments of a normal law truncated to [lower,
    upper]. Infinite bounds are approximated by wide finite proxies upstream.
    """
    if variance <= 0.0:
        raise ValueError("variance must be positive")
    if not lower < upper:
        raise ValueError("need lower < upper")
    sd = variance**0.5
    alpha = (lower - mean) / sd
    beta = (upper - mean) / sd
    mass = _cdf(beta) - _cdf(alpha)
    if mass <= 0.0:
        raise ValueError("truncation interval carries no probability mass")
    ratio = (_phi(alpha) - _phi(beta)) / mass
    t_mean = mean + sd * ratio
    t_var = variance * (1.0 + (alpha * _phi(alpha) - beta * _phi(beta)) / mass - ratio * ratio)
    return t_mean, t_var
