"""Battery state-of-charge dynamics, lifecycle throughput and degradation cost."""

from __future__ import annotations

import math
from dataclasses import dataclass


class BatteryError(Exception):
    pass


class OutOfBounds(BatteryError):
    """SOC left the allowed band; the attempted action must be rejected."""


class DegenerateThroughput(BatteryError):
    """Nonzero power requested while the lifetime throughput is zero (SOC = 1)."""


@dataclass(frozen=True, slots=True)
class BatteryParams:
    """Physical and economic constants of the storage unit.

    Power sign convention: p > 0 discharges the battery, p < 0 charges it.
    ``energy_capacity_kwh`` is the nominal pack energy (Ah rating times nominal
    voltage, already converted to kWh). ``eta_charge`` < 1 scales energy flowing
    in, ``eta_discharge`` > 1 scales energy flowing out. ``kappa`` is the
    empirical exponent of the throughput curve and has no universal default:
    it must come from configuration.
    """

    self_discharge: float        # fraction lost per step
    eta_charge: float            # < 1
    eta_discharge: float         # > 1
    energy_capacity_kwh: float
    cycles_to_failure: float
    kappa: float
    investment_cost: float       # currency for the whole pack
    soc_min: float
    soc_max: float
    p_min_kw: float              # most negative charging power
    p_max_kw: float              # largest discharging power
    step_hours: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValueError(f"need 0 <= soc_min < soc_max <= 1, got [{self.soc_min}, {self.soc_max}]")
        if not 0.0 < self.eta_charge < 1.0 < self.eta_discharge:
            raise ValueError("efficiencies must satisfy 0 < eta_charge < 1 < eta_discharge")
        if self.energy_capacity_kwh <= 0.0:
            raise ValueError("energy_capacity_kwh must be positive")
        if self.cycles_to_failure <= 0.0:
            raise ValueError("cycles_to_failure must be positive")
        if not self.p_min_kw < 0.0 < self.p_max_kw:
            raise ValueError("power limits must bracket zero (p_min < 0 < p_max)")
        if not 0.0 <= self.self_discharge < 1.0:
            raise ValueError("self_discharge must lie in [0, 1)")
        if self.step_hours <= 0.0:
            raise ValueError("step_hours must be positive")


@dataclass(frozen=True, slots=True)
class SocState:
    """State of charge as a fraction of nominal capacity."""

    soc: float


def _efficiency(p_kw: float, params: BatteryParams) -> float:
    # Charging (p < 0) applies eta_charge, discharging eta_discharge; idle bypasses both.
    if p_kw < 0.0:
        return params.eta_charge
    if p_kw > 0.0:
        return params.eta_discharge
    return 1.0


def next_soc(soc: float, p_kw: float, params: BatteryParams) -> float:
    """Raw one-step SOC propagation without the band check."""
    eta = _efficiency(p_kw, params)
    return soc * (1.0 - params.self_discharge) - eta * p_kw * params.step_hours / params.energy_capacity_kwh


def soc_step(prev: SocState, p_kw: float, params: BatteryParams) -> SocState:
    """Advance the SOC by one dispatch step.

    Raises OutOfBounds when the new SOC leaves [soc_min, soc_max]; the bounds
    are enforced as errors, not clamps, so callers see exactly which actions
    are infeasible.
    """
    if not params.p_min_kw <= p_kw <= params.p_max_kw:
        raise OutOfBounds(f"power {p_kw} kW outside [{params.p_min_kw}, {params.p_max_kw}] kW")
    soc = next_soc(prev.soc, p_kw, params)
    if soc < params.soc_min or soc > params.soc_max:
        raise OutOfBounds(f"soc {soc:.6f} outside [{params.soc_min}, {params.soc_max}]")
    return SocState(soc)


def lifetime_throughput(soc: float, params: BatteryParams) -> float:
    """Remaining lifecycle energy throughput (kWh) at the given SOC.

    Zero exactly at soc = 1; grows as the pack sits lower in its band
    (for kappa <= 0).
    """
    if not 0.0 <= soc <= 1.0:
        raise ValueError(f"soc {soc} outside [0, 1]")
    return params.cycles_to_failure * math.exp(params.kappa * soc) * (1.0 - soc) * params.energy_capacity_kwh


def degradation_cost(p_kw: float, soc: float, params: BatteryParams) -> float:
    """Reward term for wear: minus the cost of consuming lifecycle throughput.

    Even in p_kw and linear in |p_kw| and in the investment cost.
    """
    if p_kw == 0.0:
        return 0.0
    throughput = lifetime_throughput(soc, params)
    if throughput <= 0.0:
        raise DegenerateThroughput(f"zero lifetime throughput at soc={soc}; reject nonzero power")
    return -(abs(p_kw) * params.step_hours / (2.0 * throughput)) * params.investment_cost


def feasible_power(soc: float, p_kw: float, params: BatteryParams) -> bool:
    """True when the action respects power limits, the SOC band and wear model."""
    if not params.p_min_kw <= p_kw <= params.p_max_kw:
        return False
    nxt = next_soc(soc, p_kw, params)
    if nxt < params.soc_min or nxt > params.soc_max:
        return False
    if p_kw != 0.0 and lifetime_throughput(soc, params) <= 0.0:
        return False
    return True
