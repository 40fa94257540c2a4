"""Epsilon-greedy n-step Q-learning driven by tree-search targets.

The approximator is a single-hidden-layer tanh network over normalized
(state, action, lookahead-interval) features. One decision step produces one
training example: the expected maximum n-step value estimated by the search
becomes the regression target for a single semi-gradient step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import DispatchState, Exogenous
from .mcts import MctsConfig, expected_max_value
from .rules import EmptyFeasibleSet
from .scenarios import ScenarioPool, pool_from_forecast, substream
from .system import DispatchSystem

# spawn-key namespaces; decision indices stay far below these
_SELECT_TAG = 1_048_583
_INIT_TAG = 1_048_589


class DivergenceGuard(Exception):
    """A network weight left the configured magnitude bound (step size too
    large for the target scale)."""


@dataclass(frozen=True, slots=True)
class LearnerConfig:
    epsilon: float = 0.01
    alpha: float = 0.01
    gamma: float = 0.95
    bootstrap_depth: int = 4
    episodes: int = 10
    hidden: int = 32
    warm_start_episodes: int = 1      # episodes trained on one-step targets first
    weight_guard: float = 1.0e6
    initial_soc: float | None = None  # None: midpoint of the battery band
    # targets are regressed in units of this scale (roughly the worst
    # single-step reward) so step sizes stay meaningful across instances
    target_scale: float = 300.0
    # search targets for every feasible action at each decision, not only the
    # taken one; desk-scale profiles are too short to cover the action space
    # one sample at a time
    all_action_targets: bool = True

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.bootstrap_depth < 1:
            raise ValueError("bootstrap_depth must be >= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


class FeatureMap:
    """Min-max feature normalization to [-1, 1].

    Feature order: soc, p_sum, tariff_sell, tariff_buy, p_pcc_set, action,
    then (lower, upper) interval bounds for each of the n lookahead steps.
    """

    def __init__(self, lo: np.ndarray, hi: np.ndarray, horizon: int):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.shape != (6 + 2 * horizon,):
            raise ValueError("bounds must have length 6 + 2n")
        self.lo = lo
        self.span = np.where(hi - lo > 1e-12, hi - lo, 1.0)
        self.horizon = horizon

    @property
    def dim(self) -> int:
        return self.lo.size

    @classmethod
    def fit(
        cls,
        p_sum_kw: np.ndarray,
        tariffs: np.ndarray,
        p_set_kw: np.ndarray,
        soc_bounds: tuple[float, float],
        power_bounds: tuple[float, float],
        horizon: int,
        interval_margin_kw: float,
    ) -> "FeatureMap":
        """Normalization constants from the training profile; interval
        features share the injection range widened by the confidence margin."""
        ps_lo, ps_hi = float(np.min(p_sum_kw)), float(np.max(p_sum_kw))
        tr_lo, tr_hi = float(np.min(tariffs)), float(np.max(tariffs))
        st_lo, st_hi = float(np.min(p_set_kw)), float(np.max(p_set_kw))
        lo = [soc_bounds[0], ps_lo, tr_lo, tr_lo, st_lo, power_bounds[0]]
        hi = [soc_bounds[1], ps_hi, tr_hi, tr_hi, st_hi, power_bounds[1]]
        for _ in range(horizon):
            lo += [ps_lo - interval_margin_kw] * 2
            hi += [ps_hi + interval_margin_kw] * 2
        return cls(np.array(lo), np.array(hi), horizon)

    def features(self, state: DispatchState, action_kw: float, pool: ScenarioPool) -> np.ndarray:
        if pool.horizon != self.horizon:
            raise ValueError(f"pool horizon {pool.horizon} != feature horizon {self.horizon}")
        raw = np.empty(self.dim)
        raw[0] = state.soc
        raw[1] = state.p_sum_kw
        raw[2] = state.tariff_sell
        raw[3] = state.tariff_buy
        raw[4] = state.p_pcc_set_kw
        raw[5] = action_kw
        raw[6::2] = pool.lower_kw
        raw[7::2] = pool.upper_kw
        return 2.0 * (raw - self.lo) / self.span - 1.0


class QNetwork:
    """tanh MLP with one hidden layer and a scalar linear output."""

    def __init__(self, input_dim: int, hidden: int = 32, seed: int = 0, weight_guard: float = 1.0e6):
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(input_dim)
        self.w1 = rng.uniform(-scale, scale, size=(hidden, input_dim))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.uniform(-scale, scale, size=hidden)
        self.b2 = 0.0
        self.weight_guard = weight_guard

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + 1

    def value(self, x: np.ndarray) -> float:
        hidden = np.tanh(self.w1 @ x + self.b1)
        return float(self.w2 @ hidden + self.b2)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """d(output)/d(theta), flattened in (w1, b1, w2, b2) order."""
        hidden = np.tanh(self.w1 @ x + self.b1)
        dhidden = (1.0 - hidden**2) * self.w2
        return np.concatenate([np.outer(dhidden, x).ravel(), dhidden, hidden, [1.0]])

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2, [self.b2]])

    def set_flat(self, theta: np.ndarray) -> None:
        h, d = self.w1.shape
        self.w1 = theta[: h * d].reshape(h, d).copy()
        self.b1 = theta[h * d : h * d + h].copy()
        self.w2 = theta[h * d + h : h * d + 2 * h].copy()
        self.b2 = float(theta[-1])

    def update(self, x: np.ndarray, target: float, alpha: float) -> float:
        """One semi-gradient step on the squared error toward the target;
        returns the pre-update prediction."""
        hidden = np.tanh(self.w1 @ x + self.b1)
        q = float(self.w2 @ hidden + self.b2)
        err = target - q
        dhidden = (1.0 - hidden**2) * self.w2
        self.w1 += alpha * err * np.outer(dhidden, x)
        self.b1 += alpha * err * dhidden
        self.w2 += alpha * err * hidden
        self.b2 += alpha * err
        bound = max(
            float(np.max(np.abs(self.w1))),
            float(np.max(np.abs(self.b1))),
            float(np.max(np.abs(self.w2))),
            abs(self.b2),
        )
        if bound > self.weight_guard:
            raise DivergenceGuard(f"weight magnitude {bound:.3e} exceeds guard {self.weight_guard:.1e}")
        return q

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "architecture": {
                "input_dim": int(self.w1.shape[1]),
                "hidden": int(self.w1.shape[0]),
                "activation": "tanh",
                "output": "linear",
            },
            "weights": {
                "w1": self.w1.tolist(),
                "b1": self.b1.tolist(),
                "w2": self.w2.tolist(),
                "b2": self.b2,
            },
            "weight_guard": self.weight_guard,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QNetwork":
        arch = payload["architecture"]
        net = cls(arch["input_dim"], arch["hidden"], weight_guard=payload.get("weight_guard", 1.0e6))
        net.w1 = np.asarray(payload["weights"]["w1"], dtype=float)
        net.b1 = np.asarray(payload["weights"]["b1"], dtype=float)
        net.w2 = np.asarray(payload["weights"]["w2"], dtype=float)
        net.b2 = float(payload["weights"]["b2"])
        return net


class TabularQ:
    """Exact tabular stand-in honoring the same update law."""

    def __init__(self):
        self.table: dict = {}

    def value(self, key) -> float:
        return self.table.get(key, 0.0)

    def update(self, key, target: float, alpha: float) -> float:
        q = self.table.get(key, 0.0)
        self.table[key] = q + alpha * (target - q)
        return q


def select_action(
    net,
    fmap: FeatureMap,
    state: DispatchState,
    feasible: list[float],
    pool: ScenarioPool,
    epsilon: float,
    rng: np.random.Generator,
) -> float:
    """Epsilon-greedy pick over the feasible set; greedy ties resolve to the
    lowest action index."""
    if not feasible:
        raise EmptyFeasibleSet("cannot select from an empty feasible set")
    if epsilon > 0.0 and rng.random() < epsilon:
        return feasible[int(rng.integers(len(feasible)))]
    best = feasible[0]
    best_q = -np.inf
    for a in feasible:
        q = net.value(fmap.features(state, a, pool))
        if q > best_q:
            best, best_q = a, q
    return best


def warm_start_target(system: DispatchSystem, state: DispatchState, action_kw: float) -> float:
    """One-step initialization value used while extending the bootstrap depth."""
    return system.reward(state, action_kw)


@dataclass(slots=True)
class QAgent:
    """Action-value head combining the exactly known immediate reward with a
    learned future-value residual.

    The immediate reward of a one-step transition is the initial value of
    every action estimate; the network only regresses what lies beyond it, in
    units of ``target_scale``. Greedy rankings are exact from the start and
    the residual head cannot forget them.
    """

    system: DispatchSystem
    net: QNetwork
    fmap: FeatureMap
    target_scale: float

    def q_value(self, state: DispatchState, action_kw: float, pool: ScenarioPool) -> float:
        base = self.system.reward(state, action_kw)
        return base + self.target_scale * self.net.value(self.fmap.features(state, action_kw, pool))

    def select(
        self,
        state: DispatchState,
        feasible: list[float],
        pool: ScenarioPool,
        epsilon: float,
        rng: np.random.Generator,
    ) -> float:
        if not feasible:
            raise EmptyFeasibleSet("cannot select from an empty feasible set")
        if epsilon > 0.0 and rng.random() < epsilon:
            return feasible[int(rng.integers(len(feasible)))]
        best = feasible[0]
        best_q = -np.inf
        for a in feasible:
            q = self.q_value(state, a, pool)
            if q > best_q:
                best, best_q = a, q
        return best

    def update_toward(self, state: DispatchState, action_kw: float, pool: ScenarioPool,
                      target_value: float, alpha: float) -> None:
        """One semi-gradient step moving Q(s, a) toward an n-step target."""
        residual = (target_value - self.system.reward(state, action_kw)) / self.target_scale
        self.net.update(self.fmap.features(state, action_kw, pool), residual, alpha)


@dataclass(slots=True)
class TrainResult:
    net: QNetwork
    fmap: FeatureMap
    curve: list[float]                 # cumulative realized reward per episode
    filter_fallbacks: int = 0          # decisions that had to ignore the rules entirely
    dead_ends: int = 0                 # aborted search rollouts
    examples: int = 0


@dataclass(frozen=True, slots=True)
class TrainInputs:
    """Profile arrays the training loop consumes (one entry per step)."""

    p_sum_kw: np.ndarray
    tariff_sell: np.ndarray
    tariff_buy: np.ndarray
    p_pcc_set_kw: np.ndarray

    def __post_init__(self):
        n = self.p_sum_kw.size
        if not (self.tariff_sell.size == self.tariff_buy.size == self.p_pcc_set_kw.size == n):
            raise ValueError("profile arrays must share one length")

    @property
    def steps(self) -> int:
        return int(self.p_sum_kw.size)

    def state(self, t: int, soc: float) -> DispatchState:
        return DispatchState(
            soc=soc,
            p_sum_kw=float(self.p_sum_kw[t]),
            tariff_sell=float(self.tariff_sell[t]),
            tariff_buy=float(self.tariff_buy[t]),
            p_pcc_set_kw=float(self.p_pcc_set_kw[t]),
            t=t,
        )

    def exogenous(self, t: int) -> Exogenous:
        return Exogenous(
            tariff_sell=float(self.tariff_sell[t]),
            tariff_buy=float(self.tariff_buy[t]),
            p_pcc_set_kw=float(self.p_pcc_set_kw[t]),
        )

    def exo_window(self, t: int, n: int) -> tuple[Exogenous, ...]:
        return tuple(self.exogenous(t + 1 + i) for i in range(n))


def build_pool(inputs: TrainInputs, t: int, n: int, sigma_kw: float, confidence: float) -> ScenarioPool:
    """Lookahead pool at decision time t: the profile's own future values act
    as forecasts with a configured error spread."""
    forecasts = [float(inputs.p_sum_kw[t + 1 + i]) for i in range(n)]
    return pool_from_forecast(forecasts, sigma_kw, confidence)


def train(
    system: DispatchSystem,
    inputs: TrainInputs,
    cfg: LearnerConfig,
    mcts_cfg: MctsConfig,
    master_seed: int,
    sigma_kw: float = 5.0,
    confidence: float = 0.95,
    net: QNetwork | None = None,
    fmap: FeatureMap | None = None,
    decision_steps: int | None = None,
) -> TrainResult:
    """Episodic learning loop: filter, select, search, update, advance.

    An episode is one pass over the profile; the emitted curve holds the
    cumulative realized (weighted) reward per episode. Identical seeds yield
    bit-identical curves and weights. ``decision_steps`` caps the decisions
    per episode (so differently padded profiles stay comparable); it defaults
    to every step that still has a full lookahead window.
    """
    n = cfg.bootstrap_depth
    if mcts_cfg.horizon != n:
        raise ValueError("search horizon must equal the bootstrap depth")
    decisions = inputs.steps - n if decision_steps is None else decision_steps
    if decisions < 1 or decisions + n > inputs.steps:
        raise ValueError("profile too short for the bootstrap depth")

    batt = system.battery
    if fmap is None:
        from .scenarios import confidence_z

        margin = confidence_z(confidence) * sigma_kw
        tariffs = np.concatenate([inputs.tariff_sell, inputs.tariff_buy])
        fmap = FeatureMap.fit(
            inputs.p_sum_kw,
            tariffs,
            inputs.p_pcc_set_kw,
            (batt.soc_min, batt.soc_max),
            (batt.p_min_kw, batt.p_max_kw),
            n,
            margin,
        )
    if net is None:
        init_seed = int(substream(master_seed, _INIT_TAG).integers(2**31))
        net = QNetwork(fmap.dim, cfg.hidden, seed=init_seed, weight_guard=cfg.weight_guard)

    soc0 = cfg.initial_soc if cfg.initial_soc is not None else 0.5 * (batt.soc_min + batt.soc_max)
    agent = QAgent(system=system, net=net, fmap=fmap, target_scale=cfg.target_scale)
    result = TrainResult(net=net, fmap=fmap, curve=[])

    for episode in range(cfg.episodes):
        rng = substream(master_seed, _SELECT_TAG, episode)
        soc = soc0
        prev_pcc: float | None = None
        cumulative = 0.0
        for t in range(decisions):
            state = inputs.state(t, soc)
            pool = build_pool(inputs, t, n, sigma_kw, confidence)
            try:
                feasible = system.action_filter(state, float(inputs.p_sum_kw[t + 1]), prev_pcc)
            except EmptyFeasibleSet:
                feasible = system.physical_actions(state)
                result.filter_fallbacks += 1
                if not feasible:
                    raise
            action = agent.select(state, feasible, pool, cfg.epsilon, rng)

            if n == 1 or episode < cfg.warm_start_episodes:
                # one-step targets are exactly computable for every candidate;
                # they pin the residual head to its initial values across the
                # whole action ranking
                for a in feasible:
                    agent.update_toward(state, a, pool, warm_start_target(system, state, a), cfg.alpha)
                    result.examples += 1
            else:
                targets = feasible if cfg.all_action_targets else [action]
                exo = inputs.exo_window(t, n)
                for a in targets:
                    estimate = expected_max_value(
                        system,
                        state,
                        a,
                        pool,
                        exo,
                        mcts_cfg,
                        master_seed,
                        decision_index=episode * decisions + t,
                    )
                    result.dead_ends += estimate.dead_ends
                    agent.update_toward(state, a, pool, estimate.value, cfg.alpha)
                    result.examples += 1

            cumulative += system.reward(state, action)
            nxt = system.transition(state, action, float(inputs.p_sum_kw[t + 1]), inputs.exogenous(t + 1))
            prev_pcc = system.realized_pcc(nxt, action)
            soc = nxt.soc
        result.curve.append(cumulative)
    return result
