"""Composition of battery, reward and rule layers into one dispatch handle.

Search, baselines and the learner all need the same bundle: reward/transition
semantics plus a single feasibility question ("which actions may I take
here?") including the documented soft-rule fallback. Physical battery limits
are always enforced so that transitions never raise mid-rollout; knowledge
rules sit on top and can be switched off for the ablation presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .battery import BatteryParams, feasible_power
from .env import ActionSpace, DispatchState, Exogenous, RewardWeights
from .env import reward as env_reward
from .env import reward_terms as env_reward_terms
from .env import transition as env_transition
from .network import pcc_power
from .rules import EmptyFeasibleSet, RuleSet


@dataclass(frozen=True, slots=True)
class DispatchSystem:
    battery: BatteryParams
    actions: ActionSpace
    weights: RewardWeights
    rules: RuleSet | None = None
    rules_enabled: bool = False

    def __post_init__(self):
        if self.rules_enabled and self.rules is None:
            raise ValueError("rules_enabled requires a rule set")

    def reward(self, state: DispatchState, p_b_kw: float) -> float:
        return env_reward(state, p_b_kw, self.battery, self.weights)

    def reward_terms(self, state: DispatchState, p_b_kw: float) -> tuple[float, float, float]:
        return env_reward_terms(state, p_b_kw, self.battery)

    def transition(
        self, state: DispatchState, p_b_kw: float, next_p_sum_kw: float, nxt: Exogenous
    ) -> DispatchState:
        return env_transition(state, p_b_kw, next_p_sum_kw, nxt, self.battery)

    def realized_pcc(self, state: DispatchState, p_b_kw: float) -> float:
        return pcc_power(state.p_sum_kw, p_b_kw)

    def physical_actions(self, state: DispatchState) -> list[float]:
        """Actions the battery itself can absorb without leaving its band."""
        return [a for a in self.actions if feasible_power(state.soc, a, self.battery)]

    def action_filter(
        self,
        state: DispatchState,
        next_p_sum_kw: float,
        prev_pcc_kw: float | None = None,
    ) -> list[float]:
        """Feasible actions at a decision point.

        With rules enabled: physically safe actions clearing the potential
        threshold; when none clears it the soft rule is relaxed and the
        hard-feasible subset is returned instead. Raises EmptyFeasibleSet only
        when even that subset (or, with rules disabled, the physically safe
        set) is empty.

        This is the hot path of every rollout: the loop below fuses the
        physical check and the Lukasiewicz combination into scalar arithmetic
        but stays behavior-identical to composing ``physical_actions`` with
        ``rules.feasible_actions`` (a property the test suite pins down).
        """
        batt = self.battery
        rules = self.rules
        rules_on = self.rules_enabled
        soc = state.soc
        base = soc * (1.0 - batt.self_discharge)
        per_kwh = batt.step_hours / batt.energy_capacity_kwh
        physical: list[float] = []
        hard: list[float] = []
        kept: list[float] = []
        for a in self.actions.levels:
            if a < batt.p_min_kw or a > batt.p_max_kw:
                continue
            if a < 0.0:
                nxt = base - batt.eta_charge * a * per_kwh
            elif a > 0.0:
                nxt = base - batt.eta_discharge * a * per_kwh
            else:
                nxt = base
            if nxt < batt.soc_min or nxt > batt.soc_max:
                continue
            if a != 0.0 and soc >= 1.0:   # zero lifetime throughput
                continue
            physical.append(a)
            if not rules_on:
                continue
            if not rules.soc_inf <= nxt <= rules.soc_sup:
                continue
            pcc = -(next_p_sum_kw + a)
            if not rules.pcc_inf_kw <= pcc <= rules.pcc_sup_kw:
                continue
            hard.append(a)
            if prev_pcc_kw is None:
                ramp = 1.0
            else:
                ramp = math.exp(-abs(pcc - prev_pcc_kw) / rules.p_threshold_kw)
            if ramp >= rules.sigma_k:
                kept.append(a)
        if not physical:
            raise EmptyFeasibleSet(f"no physically safe action at t={state.t}")
        if not rules_on:
            return physical
        if rules.sigma_k <= 0.0:
            return physical
        if kept:
            return kept
        if hard:
            return hard
        raise EmptyFeasibleSet(f"no action clears the rule set at t={state.t}")
