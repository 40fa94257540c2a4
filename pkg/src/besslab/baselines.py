"""Alternative maximum-action-value estimators: random, exhaustive, genetic.

All estimators target the same quantity as the tree search: the n-step
maximum action value of a fixed (state, action) pair along fixed scenarios,
with the shared feasibility semantics. Budgets count objective evaluations
(one complete simulated sequence each) so the estimators race comparably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import DispatchState, Exogenous
from .rules import EmptyFeasibleSet
from .scenarios import ScenarioTrajectory, substream
from .system import DispatchSystem


class TooLarge(Exception):
    """Full enumeration would exceed the desk-scale guard."""


ENUMERATION_GUARD = 10**7


@dataclass(frozen=True, slots=True)
class EstimatorBudget:
    iterations: int
    repeats: int = 10

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True, slots=True)
class GaParams:
    population: int = 20
    tournament: int = 2
    crossover_p: float = 0.8
    mutation_p: float = 0.05
    elitism: int = 1


@dataclass(frozen=True, slots=True)
class RaceInstance:
    """Fixed problem the estimators compete on."""

    system: DispatchSystem
    state: DispatchState
    action_kw: float
    scenarios: tuple[ScenarioTrajectory, ...]
    exo: tuple[Exogenous, ...]
    horizon: int
    gamma: float
    dead_end_step_penalty: float = -1.0e4


def _root(system: DispatchSystem, state: DispatchState, action: float,
          values: tuple[float, ...], exo: tuple[Exogenous, ...]):
    root = system.transition(state, action, values[0], exo[0])
    return root, system.realized_pcc(root, action)


def _random_tail(
    system: DispatchSystem,
    root: DispatchState,
    ref_pcc: float,
    values: tuple[float, ...],
    exo: tuple[Exogenous, ...],
    horizon: int,
    gamma: float,
    rng: np.random.Generator,
    penalty: float,
) -> float:
    total, disc = 0.0, 1.0
    state, depth = root, 1
    while depth < horizon:
        try:
            acts = system.action_filter(state, values[depth], ref_pcc)
        except EmptyFeasibleSet:
            total += disc * penalty * (horizon - depth)
            break
        action = acts[int(rng.integers(len(acts)))]
        total += disc * system.reward(state, action)
        state = system.transition(state, action, values[depth], exo[depth])
        ref_pcc = system.realized_pcc(state, action)
        disc *= gamma
        depth += 1
    return total


def random_search(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    scenario: ScenarioTrajectory,
    exo: tuple[Exogenous, ...],
    horizon: int,
    gamma: float,
    budget: int,
    rng: np.random.Generator,
    dead_end_step_penalty: float = -1.0e4,
) -> float:
    """Best value among ``budget`` uniformly random feasible sequences."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    first = system.reward(state, action_kw)
    if horizon == 1:
        return first
    root, ref = _root(system, state, action_kw, scenario.values_kw, exo)
    best = -math.inf
    for _ in range(budget):
        tail = _random_tail(system, root, ref, scenario.values_kw, exo, horizon, gamma, rng,
                            dead_end_step_penalty)
        best = max(best, first + gamma * tail)
    return best


def exhaustive_search(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    scenario: ScenarioTrajectory,
    exo: tuple[Exogenous, ...],
    horizon: int,
    gamma: float,
    budget: int | None = None,
    dead_end_step_penalty: float = -1.0e4,
) -> float:
    """Lexicographic enumeration of feasible sequences.

    Without a budget the result is the exact maximum (guarded against
    oversized spaces); with one, the best value among the first ``budget``
    completed sequences, which makes the estimator deterministic at any
    budget.
    """
    first = system.reward(state, action_kw)
    if horizon == 1:
        return first
    if budget is None and len(system.actions) ** (horizon - 1) > ENUMERATION_GUARD:
        raise TooLarge("sequence space exceeds the enumeration guard")

    values = scenario.values_kw
    root, root_ref = _root(system, state, action_kw, values, exo)
    best = -math.inf
    evaluations = 0

    def visit(s: DispatchState, depth: int, ref: float, acc: float, disc: float) -> bool:
        """Depth-first walk; returns False once the budget is spent."""
        nonlocal best, evaluations
        try:
            acts = system.action_filter(s, values[depth], ref)
        except EmptyFeasibleSet:
            best = max(best, acc + disc * dead_end_step_penalty * (horizon - depth))
            evaluations += 1
            return budget is None or evaluations < budget
        for a in acts:
            new_acc = acc + disc * system.reward(s, a)
            if depth + 1 == horizon:
                best = max(best, new_acc)
                evaluations += 1
                if budget is not None and evaluations >= budget:
                    return False
            else:
                succ = system.transition(s, a, values[depth], exo[depth])
                if not visit(succ, depth + 1, system.realized_pcc(succ, a), new_acc, disc * gamma):
                    return False
        return True

    visit(root, 1, root_ref, 0.0, 1.0)
    return first + gamma * best


def genetic_search(
    system: DispatchSystem,
    state: DispatchState,
    action_kw: float,
    scenario: ScenarioTrajectory,
    exo: tuple[Exogenous, ...],
    horizon: int,
    gamma: float,
    budget: int,
    params: GaParams,
    rng: np.random.Generator,
    dead_end_step_penalty: float = -1.0e4,
) -> float:
    """Genetic search over action-index chromosomes of length n-1.

    Genes landing on infeasible actions are repaired to the nearest feasible
    level at evaluation time. The population shrinks to the budget when the
    budget cannot cover one full generation.
    """
    first = system.reward(state, action_kw)
    if horizon == 1:
        return first
    values = scenario.values_kw
    levels = list(system.actions)
    n_genes = horizon - 1
    root, root_ref = _root(system, state, action_kw, values, exo)

    def fitness(chrom: np.ndarray) -> float:
        total, disc = 0.0, 1.0
        s, ref = root, root_ref
        for g in range(n_genes):
            try:
                acts = system.action_filter(s, values[g + 1], ref)
            except EmptyFeasibleSet:
                total += disc * dead_end_step_penalty * (n_genes - g)
                break
            wanted = levels[int(chrom[g])]
            action = min(acts, key=lambda a: abs(a - wanted))
            total += disc * system.reward(s, action)
            s = system.transition(s, action, values[g + 1], exo[g + 1])
            ref = system.realized_pcc(s, action)
            disc *= gamma
        return first + gamma * total

    pop_size = min(params.population, budget)
    population = [rng.integers(len(levels), size=n_genes) for _ in range(pop_size)]
    scores = [fitness(c) for c in population]
    evaluations = pop_size
    best = max(scores)

    while evaluations < budget:
        order = sorted(range(pop_size), key=lambda i: -scores[i])
        next_pop = [population[order[i]].copy() for i in range(min(params.elitism, pop_size))]
        next_scores = [scores[order[i]] for i in range(len(next_pop))]
        while len(next_pop) < pop_size and evaluations < budget:
            def tournament() -> np.ndarray:
                picks = rng.integers(pop_size, size=params.tournament)
                return population[max(picks, key=lambda i: scores[i])]

            child = tournament().copy()
            if rng.random() < params.crossover_p and n_genes > 1:
                other = tournament()
                cut = int(rng.integers(1, n_genes))
                child[cut:] = other[cut:]
            mutate = rng.random(n_genes) < params.mutation_p
            if mutate.any():
                child[mutate] = rng.integers(len(levels), size=int(mutate.sum()))
            score = fitness(child)
            evaluations += 1
            best = max(best, score)
            next_pop.append(child)
            next_scores.append(score)
        population = next_pop
        scores = next_scores
        pop_size = len(population)
    return best


@dataclass(frozen=True, slots=True)
class RaceRow:
    estimator: str
    budget: int
    repeat: int
    raw_value: float
    mean: float
    variance: float
    normalized_mean: float


def estimator_race(
    inst: RaceInstance,
    budgets: tuple[int, ...] = (10, 100, 1000, 10000),
    repeats: int = 10,
    master_seed: int = 0,
    ga: GaParams = GaParams(),
    mcts_beta: float = 0.7,
) -> list[RaceRow]:
    """Mean/variance table of all estimators across budgets.

    Each repeat keeps one seed across budgets, so a larger budget extends the
    smaller run of the same repeat. Raw means are min-max normalized over the
    whole (estimator, budget) table.
    """
    from .mcts import MctsConfig, search_scenario

    n_scen = len(inst.scenarios)
    raw: dict[tuple[str, int], list[float]] = {}
    for budget in budgets:
        per_scenario = max(1, budget // n_scen)
        for rep in range(repeats):
            mcts_vals, rs_vals, ga_vals, es_vals = [], [], [], []
            for m, scen in enumerate(inst.scenarios):
                cfg = MctsConfig(
                    horizon=inst.horizon,
                    budget=per_scenario,
                    scenarios=1,
                    beta=mcts_beta,
                    gamma=inst.gamma,
                    dead_end_step_penalty=inst.dead_end_step_penalty,
                )
                rng = substream(master_seed, 101, rep, m)
                mcts_vals.append(
                    search_scenario(inst.system, inst.state, inst.action_kw, scen, inst.exo, cfg, rng).value
                )
                rs_vals.append(
                    random_search(
                        inst.system, inst.state, inst.action_kw, scen, inst.exo, inst.horizon,
                        inst.gamma, per_scenario, substream(master_seed, 103, rep, m),
                        inst.dead_end_step_penalty,
                    )
                )
                ga_vals.append(
                    genetic_search(
                        inst.system, inst.state, inst.action_kw, scen, inst.exo, inst.horizon,
                        inst.gamma, per_scenario, ga, substream(master_seed, 107, rep, m),
                        inst.dead_end_step_penalty,
                    )
                )
                es_vals.append(
                    exhaustive_search(
                        inst.system, inst.state, inst.action_kw, scen, inst.exo, inst.horizon,
                        inst.gamma, per_scenario, inst.dead_end_step_penalty,
                    )
                )
            for name, vals in (("mcts", mcts_vals), ("rs", rs_vals), ("ga", ga_vals), ("es", es_vals)):
                raw.setdefault((name, budget), []).append(sum(vals) / n_scen)

    means = {key: float(np.mean(vals)) for key, vals in raw.items()}
    # identical repeats (deterministic estimators) get an exact zero, not
    # summation noise
    variances = {
        key: 0.0 if len(vals) < 2 or max(vals) == min(vals) else float(np.var(vals, ddof=1))
        for key, vals in raw.items()
    }
    lo, hi = min(means.values()), max(means.values())
    span = hi - lo if hi > lo else 1.0
    rows: list[RaceRow] = []
    for (name, budget), vals in raw.items():
        for rep, value in enumerate(vals):
            rows.append(
                RaceRow(
                    estimator=name,
                    budget=budget,
                    repeat=rep,
                    raw_value=value,
                    mean=means[(name, budget)],
                    variance=variances[(name, budget)],
                    normalized_mean=(means[(name, budget)] - lo) / span,
                )
            )
    return rows
