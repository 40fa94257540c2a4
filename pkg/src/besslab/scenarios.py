"""Scenario sampling pool and truncated-normal net-injection trajectories.

A pool holds, for each lookahead step, the forecast-error distribution of the
net injection and its confidence bounds. Trajectories are drawn step-wise and
independently from the normal law truncated to those bounds, via inverse-CDF
sampling so that degenerate intervals cannot stall.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

_STD_NORMAL = NormalDist()


class InsufficientData(Exception):
    """Fewer than two error samples at some lookahead step."""


def confidence_z(confidence_level: float) -> float:
    """Two-sided standard-normal quantile for the given confidence level."""
    if not 0.0 < confidence_level < 1.0:
        raise ValueError("confidence_level must lie in (0, 1)")
    return _STD_NORMAL.inv_cdf(0.5 + confidence_level / 2.0)


@dataclass(frozen=True, slots=True)
class ScenarioPool:
    """Per-step confidence intervals and error moments over the horizon."""

    lower_kw: tuple[float, ...]
    upper_kw: tuple[float, ...]
    mean_kw: tuple[float, ...]
    variance_kw2: tuple[float, ...]
    confidence_level: float

    def __post_init__(self):
        n = len(self.mean_kw)
        if n < 1:
            raise ValueError("horizon must be at least one step")
        if not (len(self.lower_kw) == len(self.upper_kw) == len(self.variance_kw2) == n):
            raise ValueError("per-step arrays must share one length")
        for lo, mu, hi, var in zip(self.lower_kw, self.mean_kw, self.upper_kw, self.variance_kw2):
            if not lo <= mu <= hi:
                raise ValueError(f"need lower <= mean <= upper, got {lo}, {mu}, {hi}")
            if var < 0.0:
                raise ValueError("variance must be nonnegative")

    @property
    def horizon(self) -> int:
        return len(self.mean_kw)


@dataclass(frozen=True, slots=True)
class ScenarioTrajectory:
    """One realization of the net injection over the horizon."""

    values_kw: tuple[float, ...]
    scenario_index: int = 0


def fit_pool(
    error_history: list[list[float]],
    forecasts_kw: list[float],
    confidence_level: float,
) -> ScenarioPool:
    """Maximum-likelihood pool from per-step forecast-error samples.

    Step means are the forecasts shifted by the sample-mean error; variances
    are unbiased sample variances; bounds sit z standard deviations out.
    """
    if len(error_history) != len(forecasts_kw):
        raise ValueError("need one error-sample list per forecast step")
    z = confidence_z(confidence_level)
    means, variances, lowers, uppers = [], [], [], []
    for samples, forecast in zip(error_history, forecasts_kw):
        if len(samples) < 2:
            raise InsufficientData(f"need >= 2 error samples per step, got {len(samples)}")
        arr = np.asarray(samples, dtype=float)
        mu = forecast + float(arr.mean())
        var = float(arr.var(ddof=1))
        sd = var**0.5
        means.append(mu)
        variances.append(var)
        lowers.append(mu - z * sd)
        uppers.append(mu + z * sd)
    return ScenarioPool(tuple(lowers), tuple(uppers), tuple(means), tuple(variances), confidence_level)


def pool_from_forecast(
    forecasts_kw: list[float],
    sigma_kw: float | list[float],
    confidence_level: float,
) -> ScenarioPool:
    """Pool built directly from forecasts and a known error spread (used by
    the synthetic experiments, where no error history exists)."""
    n = len(forecasts_kw)
    sigmas = [float(sigma_kw)] * n if isinstance(sigma_kw, (int, float)) else [float(s) for s in sigma_kw]
    if len(sigmas) != n:
        raise ValueError("need one sigma per forecast step")
    z = confidence_z(confidence_level)
    means = tuple(float(f) for f in forecasts_kw)
    variances = tuple(s**2 for s in sigmas)
    lowers = tuple(m - z * s for m, s in zip(means, sigmas))
    uppers = tuple(m + z * s for m, s in zip(means, sigmas))
    return ScenarioPool(lowers, uppers, means, variances, confidence_level)


def _draw_truncated(mean: float, var: float, lower: float, upper: float, u: float) -> float:
    if var <= 0.0 or upper <= lower:
        return min(max(mean, lower), upper)
    sd = var**0.5
    f_lo = _STD_NORMAL.cdf((lower - mean) / sd)
    f_hi = _STD_NORMAL.cdf((upper - mean) / sd)
    # keep the mapped quantile strictly inside (0, 1) for inv_cdf
    uq = min(max(f_lo + u * (f_hi - f_lo), 1e-15), 1.0 - 1e-15)
    x = mean + sd * _STD_NORMAL.inv_cdf(uq)
    return min(max(x, lower), upper)


def sample_trajectory(
    pool: ScenarioPool,
    rng: np.random.Generator,
    scenario_index: int = 0,
) -> ScenarioTrajectory:
    """Draw one trajectory; every value lands inside its step's interval."""
    us = rng.random(pool.horizon)
    values = tuple(
        _draw_truncated(m, v, lo, hi, u)
        for m, v, lo, hi, u in zip(pool.mean_kw, pool.variance_kw2, pool.lower_kw, pool.upper_kw, us)
    )
    return ScenarioTrajectory(values, scenario_index)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (decision-time, scenario, ...) context.

    Counter-based splitting through SeedSequence spawn keys keeps streams
    reproducible regardless of evaluation order or parallelism.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))


def sample_scenarios(
    pool: ScenarioPool,
    count: int,
    master_seed: int,
    decision_index: int = 0,
) -> list[ScenarioTrajectory]:
    """The ``count`` trajectories a seeded search would investigate."""
    return [
        sample_trajectory(pool, substream(master_seed, decision_index, m), scenario_index=m)
        for m in range(count)
    ]
