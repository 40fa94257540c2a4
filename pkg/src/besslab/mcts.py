"""Scenario-conditioned Monte-Carlo tree search over dispatch sequences.

For a fixed first action, each sampled net-injection trajectory gets its own
search tree rooted at the state one step ahead. Node statistics live on the
incoming edge (node and incoming edge coincide in a tree): a node's cumulative
value aggregates discounted returns-to-go measured from its parent's decision,
so the mean value ranks sibling actions directly. Per-scenario maxima are
averaged into the expected maximum action value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import DispatchState, Exogenous
from .rules import EmptyFeasibleSet
from .scenarios import ScenarioPool, ScenarioTrajectory, sample_scenarios, substream
from .system import DispatchSystem


class NoChildren(Exception):
    """best_child asked on a leaf."""


class DeadEnd(Exception):
    """No feasible action even after the soft-rule fallback."""


@dataclass(frozen=True, slots=True)
class MctsConfig:
    horizon: int                      # bootstrap depth n
    budget: int                       # selection/rollout/backup cycles per scenario
    scenarios: int = 1                # M trajectories per estimate
    beta: float = 0.7                 # exploration constant
    gamma: float = 0.95
    # return per remaining step on aborted rollouts; roughly the worst
    # single-step reward of the default system
    dead_end_step_penalty: float = -300.0

    def __post_init__(self):
        if self.horizon < 1 or self.scenarios < 1 or self.budget < 1:
            raise ValueError("horizon, scenarios and budget must be >= 1")
        if self.beta < 0.0:
            raise ValueError("beta must be nonnegative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass(slots=True)
class Node:
    state: DispatchState
    depth: int                        # 1 = one step past the decision time
    parent: "Node | None"
    action_in: float
    edge_reward: float                # immediate reward collected entering this node
    ref_pcc_kw: float                 # realized PCC power at this node's step
    untried: list[float]
    dead_end: bool = False
    children: list["Node"] = field(default_factory=list)
    n_visits: int = 0
    g_total: float = 0.0
    # running span of the samples backed through this node's children; local
    # value scale for the exploration bonus
    span_lo: float = math.inf
    span_hi: float = -math.inf

    def mean_value(self) -> float:
        return self.g_total / self.n_visits

    def child_span(self) -> float:
        if self.span_hi <= self.span_lo:
            return 1.0
        return self.span_hi - self.span_lo


@dataclass(slots=True)
class SearchTree:
    root: Node
    nodes: list[Node]
    dead_end_rollouts: int = 0


@dataclass(frozen=True, slots=True)
class ValueEstimate:
    value: float
    best_action_sequence: tuple[float, ...]
    scenarios_used: int
    iterations_used: int
    dead_ends: int = 0


@dataclass(frozen=True, slots=True)
class _Search:
    """Per-scenario search context: system handle, sampled injections and the
    deterministic exogenous timeline for steps t+1 .. t+n."""

    system: DispatchSystem
    scenario: tuple[float, ...]
    exo: tuple[Exogenous, ...]
    cfg: MctsConfig

    def terminal(self, depth: int) -> bool:
        return depth >= self.cfg.horizon

    def make_node(self, state: DispatchState, depth: int, parent: Node | None, action_in: float) -> Node:
        edge_reward = 0.0 if parent is None else self.system.reward(parent.state, action_in)
        ref_pcc = self.system.realized_pcc(state, action_in)
        untried: list[float] = []
        dead_end = False
        if not self.terminal(depth):
            try:
                untried = list(self.system.action_filter(state, self.scenario[depth], ref_pcc))
            except EmptyFeasibleSet:
                dead_end = True
        return Node(
            state=state,
            depth=depth,
            parent=parent,
            action_in=action_in,
            edge_reward=edge_reward,
            ref_pcc_kw=ref_pcc,
            untried=untried,
            dead_end=dead_end,
        )

    def child_state(self, node: Node, action: float) -> DispatchState:
        return self.system.transition(node.state, action, self.scenario[node.depth], self.exo[node.depth])


def best_child(node: Node, beta: float) -> Node:
    """UCT pick among fully visited children; ties go to the lowest action
    index (children are created in action order)."""
    if not node.children:
        raise NoChildren(f"node at depth {node.depth} has no children")
    log_n = math.log(node.n_visits)
    best = None
    best_score = -math.inf
    for child in node.children:
        score = child.g_total / child.n_visits + beta * math.sqrt(log_n / child.n_visits)
        if score > best_score:
            best, best_score = child, score
    return best


def tree_policy(tree: SearchTree, search: _Search) -> Node:
    """Descend by UCT until a node with untried actions (expand one child) or
    a terminal/dead-end node is hit. Unvisited actions take priority over any
    UCT comparison. The exploration constant is scaled per node by the local
    span of sampled child returns, so its paper value (quoted against
    normalized scores) explores proportionately at every depth regardless of
    the instance's currency magnitudes."""
    node = tree.root
    while True:
        if search.terminal(node.depth) or node.dead_end:
            return node
        if node.untried:
            action = node.untried.pop(0)
            child = search.make_node(search.child_state(node, action), node.depth + 1, node, action)
            node.children.append(child)
            tree.nodes.append(child)
            return child
        node = best_child(node, search.cfg.beta * node.child_span())


def default_policy(node: Node, search: _Search, rng: np.random.Generator, tree: SearchTree) -> float:
    """Uniform-random feasible rollout from the node to the horizon along the
    fixed scenario; returns the discounted reward sum. Dead ends contribute
    the configured per-step penalty for the unreachable remainder."""
    cfg = search.cfg
    if node.dead_end:
        tree.dead_end_rollouts += 1
        return cfg.dead_end_step_penalty * (cfg.horizon - node.depth)
    total = 0.0
    disc = 1.0
    state, depth, ref_pcc = node.state, node.depth, node.ref_pcc_kw
    while depth < cfg.horizon:
        try:
            acts = search.system.action_filter(state, search.scenario[depth], ref_pcc)
        except EmptyFeasibleSet:
            tree.dead_end_rollouts += 1
            total += disc * cfg.dead_end_step_penalty * (cfg.horizon - depth)
            break
        action = acts[int(rng.integers(len(acts)))]
        total += disc * search.system.reward(state, action)
        state = search.system.transition(state, action, search.scenario[depth], search.exo[depth])
        ref_pcc = search.system.realized_pcc(state, action)
        disc *= cfg.gamma
        depth += 1
    return total


def backup(node: Node, rollout_return: float, gamma: float) -> float:
    """Propagate one sampled return to the root. Each node accumulates the
    discounted return-to-go of its parent's decision, so mean value stays the
    plain average of sampled returns through the incoming edge. Returns the
    complete-sequence return accumulated at the root."""
    ret = rollout_return
    while node.parent is not None:
        ret = node.edge_reward + gamma * ret
        node.n_visits += 1
        node.g_total += ret
        parent = node.parent
        if ret < parent.span_lo:
            parent.span_lo = ret
        if ret > parent.span_hi:
            parent.span_hi = ret
        node = parent
    node.n_visits += 1
    node.g_total += ret
    return ret


def extract_sequence(root: Node) -> tuple[float, ...]:
    """Greedy-by-mean action path from the root.

    Children sit in action order and max() keeps the first of equal keys, so
    ties resolve to the lowest action index.
    """
    seq: list[float] = []
    node = root
    while node.children:
        node = max(node.children, key=Node.mean_value)
        seq.append(node.action_in)
    return tuple(seq)


def search_scenario(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    scenario: ScenarioTrajectory,
    exo: tuple[Exogenous, ...],
    cfg: MctsConfig,
    rng: np.random.Generator,
) -> ValueEstimate:
    """n-step maximum action value of (state, action) under one scenario.

    The tree roots at the successor implied by the scenario's first step; the
    estimate is the realized first reward plus the discounted mean value of
    the best root child.
    """
    values = scenario.values_kw
    if len(values) < cfg.horizon or len(exo) < cfg.horizon:
        raise ValueError("scenario and exogenous timeline must cover the horizon")
    first_reward = system.reward(state, action_kw)
    if cfg.horizon == 1:
        return ValueEstimate(first_reward, (), 1, 0)

    search = _Search(system=system, scenario=values, exo=exo, cfg=cfg)
    root_state = system.transition(state, action_kw, values[0], exo[0])
    root = search.make_node(root_state, 1, None, action_kw)
    tree = SearchTree(root=root, nodes=[root])
    if root.dead_end:
        value = first_reward + cfg.gamma * cfg.dead_end_step_penalty * (cfg.horizon - 1)
        return ValueEstimate(value, (), 1, 0, dead_ends=1)

    # The maximum action value is the best complete tail sequence the search
    # identifies; every backed-up iteration yields one candidate tail return.
    # Edge means steer the selection (and the extracted policy) but a mean
    # would understate the max the estimators race to find.
    best_tail = -math.inf
    for _ in range(cfg.budget):
        leaf = tree_policy(tree, search)
        rollout = default_policy(leaf, search, rng, tree)
        best_tail = max(best_tail, backup(leaf, rollout, cfg.gamma))

    value = first_reward + cfg.gamma * best_tail
    return ValueEstimate(
        value=value,
        best_action_sequence=extract_sequence(root),
        scenarios_used=1,
        iterations_used=root.n_visits,
        dead_ends=tree.dead_end_rollouts,
    )


def expected_max_value(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    pool: ScenarioPool,
    exo: tuple[Exogenous, ...],
    cfg: MctsConfig,
    master_seed: int,
    decision_index: int = 0,
    scenarios: list[ScenarioTrajectory] | None = None,
) -> ValueEstimate:
    """Average of per-scenario maximum action values over M sampled (or
    supplied) trajectories. Fully determined by the master seed and the
    decision index."""
    if scenarios is None:
        scenarios = sample_scenarios(pool, cfg.scenarios, master_seed, decision_index)
    estimates = []
    for m, scen in enumerate(scenarios):
        rng = substream(master_seed, decision_index, m, 1)
        estimates.append(search_scenario(system, state, action_kw, scen, exo, cfg, rng))
    mean_value = sum(e.value for e in estimates) / len(estimates)
    return ValueEstimate(
        value=mean_value,
        best_action_sequence=estimates[0].best_action_sequence,
        scenarios_used=len(estimates),
        iterations_used=sum(e.iterations_used for e in estimates),
        dead_ends=sum(e.dead_ends for e in estimates),
    )
