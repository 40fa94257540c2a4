"""Dispatch MDP: states, discretized actions, reward terms and transitions.

The battery is the only dispatchable component. An action is a battery power
setpoint held for one step; the exogenous inputs (net injection, tariffs,
tracking setpoint) advance along a profile timeline, with only the net
injection treated as stochastic by the lookahead machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .battery import BatteryParams, SocState, degradation_cost, soc_step
from .network import pcc_power


@dataclass(frozen=True, slots=True)
class DispatchState:
    """MDP state at one decision time.

    ``p_sum_kw`` is the aggregate non-dispatchable injection (generation minus
    EV and other load). ``tariff_sell`` prices discharged energy, ``tariff_buy``
    prices charged energy; case studies use a single time-of-use schedule for
    both.
    """

    soc: float
    p_sum_kw: float
    tariff_sell: float
    tariff_buy: float
    p_pcc_set_kw: float
    t: int = 0

    def __post_init__(self):
        if self.tariff_sell < 0.0 or self.tariff_buy < 0.0:
            raise ValueError("tariffs must be nonnegative")


@dataclass(frozen=True, slots=True)
class ActionSpace:
    """Ordered battery power levels (kW) spanning [p_min, p_max], including 0."""

    levels: tuple[float, ...]

    def __post_init__(self):
        if len(self.levels) < 2:
            raise ValueError("need at least two action levels")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if 0.0 not in self.levels:
            raise ValueError("levels must contain 0")

    @classmethod
    def uniform(cls, p_min_kw: float, p_max_kw: float, n_levels: int = 11) -> "ActionSpace":
        """Evenly spaced levels between the power limits; 0 is inserted if the
        grid misses it."""
        if n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        p_min_kw, p_max_kw = float(p_min_kw), float(p_max_kw)
        step = (p_max_kw - p_min_kw) / (n_levels - 1)
        levels = [p_min_kw + i * step for i in range(n_levels)]
        levels[-1] = p_max_kw
        # snap a near-zero gridpoint to exactly zero, else insert zero
        nearest = min(range(n_levels), key=lambda i: abs(levels[i]))
        if abs(levels[nearest]) < 1e-9 * max(abs(p_min_kw), p_max_kw):
            levels[nearest] = 0.0
        elif 0.0 not in levels:
            levels.append(0.0)
            levels.sort()
        return cls(tuple(levels))

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True, slots=True)
class RewardWeights:
    """Weights of the three reward factors (tariff revenue, wear, tracking)."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.w3 < 0 or (self.w1 == self.w2 == self.w3 == 0.0):
            raise ValueError("weights must be nonnegative and not all zero")


def reward_terms(state: DispatchState, p_b_kw: float, batt: BatteryParams) -> tuple[float, float, float]:
    """The three unweighted reward factors for taking ``p_b_kw`` in ``state``.

    r1: tariff revenue of the traded energy (negative when buying).
    r2: minus the degradation cost charged against lifecycle throughput.
    r3: minus the absolute tracking error at the point of common coupling.
    """
    tariff = state.tariff_sell if p_b_kw >= 0.0 else state.tariff_buy
    r1 = tariff * p_b_kw * batt.step_hours
    r2 = degradation_cost(p_b_kw, state.soc, batt)
    r3 = -abs(pcc_power(state.p_sum_kw, p_b_kw) - state.p_pcc_set_kw)
    return r1, r2, r3


def reward(state: DispatchState, p_b_kw: float, batt: BatteryParams, w: RewardWeights) -> float:
    """Weighted immediate reward of the action."""
    r1, r2, r3 = reward_terms(state, p_b_kw, batt)
    return w.w1 * r1 + w.w2 * r2 + w.w3 * r3


@dataclass(frozen=True, slots=True)
class Exogenous:
    """Next-step exogenous inputs supplied by the profile timeline."""

    tariff_sell: float
    tariff_buy: float
    p_pcc_set_kw: float


def transition(
    state: DispatchState,
    p_b_kw: float,
    next_p_sum_kw: float,
    nxt: Exogenous,
    batt: BatteryParams,
) -> DispatchState:
    """Deterministic successor once the next net injection is realized.

    Propagates OutOfBounds from the battery layer for infeasible actions.
    """
    soc = soc_step(SocState(state.soc), p_b_kw, batt).soc
    return DispatchState(
        soc=soc,
        p_sum_kw=next_p_sum_kw,
        tariff_sell=nxt.tariff_sell,
        tariff_buy=nxt.tariff_buy,
        p_pcc_set_kw=nxt.p_pcc_set_kw,
        t=state.t + 1,
    )


def episode_return(rewards: list[float], gamma: float) -> float:
    """Discounted sum of a reward sequence, first element undiscounted."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    total = 0.0
    for r in reversed(rewards):
        total = r + gamma * total
    return total
