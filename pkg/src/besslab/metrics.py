"""Greedy policy evaluation, dispatch metrics and the optional flow gate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import DispatchState
from .learner import FeatureMap, QNetwork, TrainInputs, build_pool
from .network import GridLimits, RadialNetwork, check_operational, pcc_power, solve_distflow
from .network import Branch, NetworkNode, NonConvergence
from .rules import EmptyFeasibleSet
from .scenarios import ScenarioPool
from .system import DispatchSystem


@dataclass(frozen=True, slots=True)
class DispatchMetrics:
    electricity_revenue: float    # sum of tariff terms
    degradation_cost: float       # nonnegative wear total
    pcc_sd_kw: float              # RMS deviation from the PCC setpoint
    steps: int
    cumulative_reward: float      # weighted reward total over the evaluation

    @property
    def net_revenue(self) -> float:
        return self.electricity_revenue - self.degradation_cost


@dataclass(frozen=True, slots=True)
class TraceRow:
    t: int
    soc: float
    p_b_kw: float
    p_pcc_kw: float
    p_pcc_set_kw: float
    r1: float
    r2: float
    r3: float


class GreedyPolicy:
    """Highest-value feasible action under a trained agent (epsilon = 0)."""

    def __init__(self, agent):
        self.agent = agent

    def __call__(self, state: DispatchState, feasible: list[float], pool: ScenarioPool) -> float:
        best, best_q = feasible[0], -np.inf
        for a in feasible:
            q = self.agent.q_value(state, a, pool)
            if q > best_q:
                best, best_q = a, q
        return best


class FixedPolicy:
    """Feasible action nearest a constant power target (0 kW by default)."""

    def __init__(self, target_kw: float = 0.0):
        self.target_kw = target_kw

    def __call__(self, state: DispatchState, feasible: list[float], pool: ScenarioPool) -> float:
        return min(feasible, key=lambda a: abs(a - self.target_kw))


def microgrid_feeder(ap_max_pu: float = 1.5, r_scale: float = 1.0) -> tuple[RadialNetwork, dict]:
    """Six-load-point radial feeder with PV, EV and BESS attachment nodes.

    Line impedances are placeholders (the source case study publishes none);
    the shares dictionary says how aggregate injections split across nodes.
    """
    nodes = [NetworkNode("pcc")]
    branches = []
    chain = ["pcc", "n1", "n2", "n3", "n4", "n5", "n6"]
    for a, b in zip(chain, chain[1:]):
        nodes.append(NetworkNode(b))
        branches.append(Branch(a, b, 0.004 * r_scale, 0.008 * r_scale, ap_max_pu))
    for stub, host in (("pv1", "n2"), ("pv2", "n4"), ("ev1", "n3"), ("ev2", "n5"), ("bess", "n1")):
        nodes.append(NetworkNode(stub))
        branches.append(Branch(host, stub, 0.002 * r_scale, 0.004 * r_scale, ap_max_pu))
    shares = {
        "load": {f"n{i}": 1.0 / 6.0 for i in range(1, 7)},
        "pv": {"pv1": 2.0 / 3.0, "pv2": 1.0 / 3.0},
        "ev": {"ev1": 1.0 / 3.0, "ev2": 2.0 / 3.0},
        "bess": "bess",
    }
    return RadialNetwork(tuple(nodes), tuple(branches), root_id="pcc", s_base_kva=200.0), shares


@dataclass(frozen=True, slots=True)
class FlowGate:
    """Per-step electrical feasibility filter over candidate actions."""

    template: RadialNetwork
    shares: dict
    limits: GridLimits
    load_power_factor_tan: float = 0.33   # q = tan(phi) * p at load nodes

    def step_network(self, pv_kw: float, ev_kw: float, load_kw: float, p_b_kw: float) -> RadialNetwork:
        nodes = []
        for node in self.template.nodes:
            nid = node.node_id
            p_d = load_kw * self.shares["load"].get(nid, 0.0) + ev_kw * self.shares["ev"].get(nid, 0.0)
            p_g = pv_kw * self.shares["pv"].get(nid, 0.0)
            if nid == self.shares["bess"]:
                p_g += p_b_kw    # discharge injects, charge adds demand
            q_d = load_kw * self.shares["load"].get(nid, 0.0) * self.load_power_factor_tan
            nodes.append(NetworkNode(nid, p_demand_kw=p_d, q_demand_kvar=q_d, p_gen_kw=p_g))
        return RadialNetwork(
            tuple(nodes),
            self.template.branches,
            self.template.root_id,
            self.template.v_min_pu,
            self.template.v_max_pu,
            self.template.s_base_kva,
            self.template.v_root_pu,
        )

    def admits(self, pv_kw: float, ev_kw: float, load_kw: float, p_b_kw: float, batt) -> bool:
        net = self.step_network(pv_kw, ev_kw, load_kw, p_b_kw)
        try:
            sol = solve_distflow(net)
        except NonConvergence:
            return False
        p_sum = pv_kw - ev_kw - load_kw
        report = check_operational(sol, net, self.limits, pcc_power(p_sum, p_b_kw), pv_kw, p_b_kw, batt)
        return not report


@dataclass(slots=True)
class EvaluationResult:
    metrics: DispatchMetrics
    trace: list[TraceRow]
    filter_fallbacks: int = 0
    flow_rejections: int = 0


def evaluate_policy(
    policy,
    system: DispatchSystem,
    inputs: TrainInputs,
    horizon: int,
    sigma_kw: float = 5.0,
    confidence: float = 0.95,
    initial_soc: float | None = None,
    flow_gate: FlowGate | None = None,
    components: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    decision_steps: int | None = None,
) -> EvaluationResult:
    """Deterministic greedy rollout of a policy over the profile.

    The PCC standard deviation is the RMS deviation of the realized PCC power
    from its setpoint over the evaluated steps. ``components`` (pv, ev, load)
    are only needed when the flow gate is active.
    """
    decisions = inputs.steps - horizon if decision_steps is None else decision_steps
    if decisions < 1 or decisions + horizon > inputs.steps:
        raise ValueError("profile too short for the lookahead horizon")
    if flow_gate is not None and components is None:
        raise ValueError("flow gating needs the per-step pv/ev/load components")

    batt = system.battery
    soc = initial_soc if initial_soc is not None else 0.5 * (batt.soc_min + batt.soc_max)
    prev_pcc: float | None = None
    trace: list[TraceRow] = []
    revenue = 0.0
    wear = 0.0
    cumulative = 0.0
    sq_dev = 0.0
    fallbacks = 0
    flow_rejections = 0

    for t in range(decisions):
        state = inputs.state(t, soc)
        pool = build_pool(inputs, t, horizon, sigma_kw, confidence)
        try:
            feasible = system.action_filter(state, float(inputs.p_sum_kw[t + 1]), prev_pcc)
        except EmptyFeasibleSet:
            feasible = system.physical_actions(state)
            fallbacks += 1
            if not feasible:
                raise
        if flow_gate is not None:
            pv, ev, load = (float(components[0][t]), float(components[1][t]), float(components[2][t]))
            admitted = [a for a in feasible if flow_gate.admits(pv, ev, load, a, batt)]
            if admitted:
                flow_rejections += len(feasible) - len(admitted)
                feasible = admitted
        action = policy(state, feasible, pool)
        r1, r2, r3 = system.reward_terms(state, action)
        p_pcc = system.realized_pcc(state, action)
        trace.append(TraceRow(t, soc, action, p_pcc, state.p_pcc_set_kw, r1, r2, r3))
        revenue += r1
        wear += -r2
        cumulative += system.weights.w1 * r1 + system.weights.w2 * r2 + system.weights.w3 * r3
        sq_dev += (p_pcc - state.p_pcc_set_kw) ** 2

        nxt = system.transition(state, action, float(inputs.p_sum_kw[t + 1]), inputs.exogenous(t + 1))
        prev_pcc = system.realized_pcc(nxt, action)
        soc = nxt.soc

    metrics = DispatchMetrics(
        electricity_revenue=revenue,
        degradation_cost=wear,
        pcc_sd_kw=(sq_dev / decisions) ** 0.5,
        steps=decisions,
        cumulative_reward=cumulative,
    )
    return EvaluationResult(metrics=metrics, trace=trace,
                            filter_fallbacks=fallbacks, flow_rejections=flow_rejections)
