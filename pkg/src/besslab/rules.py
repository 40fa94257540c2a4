"""Dispatch rules as soft-logic potentials over candidate actions.

Three rules confine the action space: a hard SOC band and a hard PCC band on
the successor state, and a soft ramp rule penalizing large jumps of the PCC
power between consecutive steps. Each rule maps to a potential in [0, 1];
potentials combine through Lukasiewicz operators and actions survive when the
combined potential clears a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .battery import BatteryParams, next_soc
from .env import ActionSpace, DispatchState
from .network import pcc_power

# Threshold equal to the soft potential at exactly one ramp-width of deviation:
# with both hard rules satisfied the filter then reduces to the ramp inequality.
DEFAULT_THRESHOLD = math.exp(-1.0)


class EmptyFeasibleSet(Exception):
    """No candidate action clears the potential threshold. Callers fall back
    to the hard-feasible subset (soft rule relaxed)."""


@dataclass(frozen=True, slots=True)
class RuleSet:
    soc_inf: float
    soc_sup: float
    pcc_inf_kw: float
    pcc_sup_kw: float
    p_threshold_kw: float
    sigma_k: float = DEFAULT_THRESHOLD
    # per-rule weights are carried for completeness; the logic combination
    # below does not consume them
    rule_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0.0 <= self.sigma_k <= 1.0:
            raise ValueError("sigma_k must lie in [0, 1]")
        if self.p_threshold_kw <= 0.0:
            raise ValueError("p_threshold_kw must be positive")
        if not self.soc_inf < self.soc_sup:
            raise ValueError("soc_inf must be below soc_sup")
        if not self.pcc_inf_kw < self.pcc_sup_kw:
            raise ValueError("pcc_inf must be below pcc_sup")

    def rules(self) -> tuple[tuple[float, str, str], ...]:
        """(weight, kind, predicate) description of the rule set."""
        return (
            (self.rule_weights[0], "hard", f"{self.soc_inf} <= soc' <= {self.soc_sup}"),
            (self.rule_weights[1], "hard", f"{self.pcc_inf_kw} <= pcc' <= {self.pcc_sup_kw}"),
            (self.rule_weights[2], "soft", f"|pcc' - pcc| <= {self.p_threshold_kw}"),
        )


def hard_potential(condition_holds: bool) -> float:
    """Indicator potential of a hard rule."""
    return 1.0 if condition_holds else 0.0


def soft_potential(delta_pcc_kw: float, p_threshold_kw: float) -> float:
    """Exponential distance-to-satisfiability of the ramp rule."""
    if p_threshold_kw <= 0.0:
        raise ValueError("p_threshold_kw must be positive")
    return min(1.0, math.exp(-abs(delta_pcc_kw) / p_threshold_kw))


def luk_and(a: float, b: float) -> float:
    return max(a + b - 1.0, 0.0)


def luk_or(a: float, b: float) -> float:
    return min(a + b, 1.0)


def luk_not(a: float) -> float:
    return 1.0 - a


def total_potential(
    action_kw: float,
    state: DispatchState,
    successor: DispatchState,
    rules: RuleSet,
    prev_pcc_kw: float | None = None,
) -> float:
    """Combined potential of a candidate action.

    The successor carries the next-step SOC and net injection implied by the
    action; the successor PCC power pairs the action with that injection.
    ``prev_pcc_kw`` is the realized PCC power of the current step (None at an
    episode start, where the ramp rule is vacuously satisfied).
    """
    succ_pcc = pcc_power(successor.p_sum_kw, action_kw)
    phi_soc = hard_potential(rules.soc_inf <= successor.soc <= rules.soc_sup)
    phi_pcc = hard_potential(rules.pcc_inf_kw <= succ_pcc <= rules.pcc_sup_kw)
    if prev_pcc_kw is None:
        phi_ramp = 1.0
    else:
        phi_ramp = soft_potential(succ_pcc - prev_pcc_kw, rules.p_threshold_kw)
    return luk_and(luk_and(phi_soc, phi_pcc), phi_ramp)


def hard_feasible(
    action_kw: float,
    state: DispatchState,
    next_p_sum_kw: float,
    rules: RuleSet,
    batt: BatteryParams,
) -> bool:
    """Both hard rules hold for the successor implied by the action."""
    soc = next_soc(state.soc, action_kw, batt)
    if not rules.soc_inf <= soc <= rules.soc_sup:
        return False
    pcc = pcc_power(next_p_sum_kw, action_kw)
    return rules.pcc_inf_kw <= pcc <= rules.pcc_sup_kw


def feasible_actions(
    state: DispatchState,
    candidates: ActionSpace,
    next_p_sum_kw: float,
    rules: RuleSet,
    batt: BatteryParams,
    prev_pcc_kw: float | None = None,
) -> list[float]:
    """Candidates whose combined potential clears the threshold.

    Successors are evaluated with the dispatch transition semantics but
    without the battery-band error: a rule violation here only means the
    action is filtered out. Raises EmptyFeasibleSet when nothing passes.
    """
    if len(candidates) == 0:
        raise ValueError("candidate set must be non-empty")
    kept: list[float] = []
    for a in candidates:
        succ = DispatchState(
            soc=next_soc(state.soc, a, batt),
            p_sum_kw=next_p_sum_kw,
            tariff_sell=state.tariff_sell,
            tariff_buy=state.tariff_buy,
            p_pcc_set_kw=state.p_pcc_set_kw,
            t=state.t + 1,
        )
        if total_potential(a, state, succ, rules, prev_pcc_kw) >= rules.sigma_k:
            kept.append(a)
    if not kept:
        raise EmptyFeasibleSet(f"no action clears sigma_k={rules.sigma_k} at t={state.t}")
    return kept
