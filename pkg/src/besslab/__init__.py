"""besslab: a seedable microgrid battery-dispatch laboratory.

Rule-constrained n-step Q-learning with scenario-based Monte-Carlo tree
search for dispatching a battery energy storage system, plus the baselines,
oracles and metrics needed to reproduce the comparison structure at desk
scale.
"""

__version__ = "0.1.0"

from .battery import BatteryParams, SocState, degradation_cost, lifetime_throughput, soc_step
from .env import ActionSpace, DispatchState, RewardWeights, episode_return, reward, transition
from .mcts import MctsConfig, ValueEstimate, expected_max_value, search_scenario
from .network import GridLimits, RadialNetwork, check_operational, pcc_power, solve_distflow
from .rules import RuleSet, feasible_actions, total_potential
from .scenarios import ScenarioPool, ScenarioTrajectory, fit_pool, sample_trajectory
from .system import DispatchSystem

__all__ = [
    "__version__",
    "ActionSpace",
    "BatteryParams",
    "DispatchState",
    "DispatchSystem",
    "GridLimits",
    "MctsConfig",
    "RadialNetwork",
    "RewardWeights",
    "RuleSet",
    "ScenarioPool",
    "ScenarioTrajectory",
    "SocState",
    "ValueEstimate",
    "check_operational",
    "degradation_cost",
    "episode_return",
    "expected_max_value",
    "feasible_actions",
    "fit_pool",
    "lifetime_throughput",
    "pcc_power",
    "reward",
    "sample_trajectory",
    "search_scenario",
    "soc_step",
    "solve_distflow",
    "total_potential",
    "transition",
]
