"""Run orchestration: presets to artifacts on disk.

Every run directory receives the resolved configuration, a manifest with the
seed and repository state, the metric/trace/curve CSVs for the executed
preset, the serialized network weights where training is involved, and the
companion figures. CSV floats are written with shortest-roundtrip ``repr`` so
reruns with one seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
import os
import subprocess
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .baselines import GaParams, RaceInstance, RaceRow, estimator_race
from .config import (
    ExperimentConfig,
    build_learner,
    build_mcts,
    build_system,
    initial_soc,
)
from .learner import QNetwork, TrainInputs, TrainResult, train
from .metrics import (
    DispatchMetrics,
    EvaluationResult,
    FixedPolicy,
    FlowGate,
    GreedyPolicy,
    TraceRow,
    evaluate_policy,
    microgrid_feeder,
)
from .network import GridLimits
from .profiles import ProfileTimeline, load_profiles, synth_profiles, write_profile
from .scenarios import sample_scenarios
from .system import DispatchSystem

TRAINING_PRESETS = ("proposed", "no-rules-n4", "rules-n1")


@dataclass(slots=True)
class RunArtifacts:
    out_dir: str
    files: dict[str, str] = field(default_factory=dict)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def register(self, name: str) -> str:
        self.files[name] = self.path(name)
        return self.files[name]


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_manifest(cfg: ExperimentConfig, art: RunArtifacts) -> None:
    manifest = {
        "package": "besslab",
        "version": __version__,
        "preset": cfg.preset,
        "master_seed": cfg.master_seed,
        "git_describe": _git_describe(),
        "config": cfg.raw,
    }
    with open(art.register("manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(art.register("config.yaml"), "w") as fh:
        fh.write(cfg.to_yaml())


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_metrics(metrics: DispatchMetrics, path: str) -> None:
    _write_csv(
        path,
        ["electricity_revenue", "degradation_cost", "net_revenue", "pcc_sd_kw", "steps", "cumulative_reward"],
        [[metrics.electricity_revenue, metrics.degradation_cost, metrics.net_revenue,
          metrics.pcc_sd_kw, metrics.steps, metrics.cumulative_reward]],
    )


def write_trace(trace: list[TraceRow], path: str) -> None:
    _write_csv(
        path,
        ["t", "soc", "p_b_kw", "p_pcc_kw", "p_pcc_set_kw", "r1", "r2", "r3"],
        [[r.t, r.soc, r.p_b_kw, r.p_pcc_kw, r.p_pcc_set_kw, r.r1, r.r2, r.r3] for r in trace],
    )


def read_trace(path: str) -> list[TraceRow]:
    with open(path, newline="") as fh:
        return [
            TraceRow(int(r["t"]), float(r["soc"]), float(r["p_b_kw"]), float(r["p_pcc_kw"]),
                     float(r["p_pcc_set_kw"]), float(r["r1"]), float(r["r2"]), float(r["r3"]))
            for r in csv.DictReader(fh)
        ]


def write_curve(curve: list[float], path: str) -> None:
    _write_csv(path, ["episode", "cumulative_reward"], [[i + 1, v] for i, v in enumerate(curve)])


def write_race(rows: list[RaceRow], path: str) -> None:
    _write_csv(
        path,
        ["estimator", "budget", "repeat", "raw_value", "mean", "variance", "normalized_mean"],
        [[r.estimator, r.budget, r.repeat, r.raw_value, r.mean, r.variance, r.normalized_mean] for r in rows],
    )


# constant padding keeps one seeded timeline identical across presets with
# different bootstrap depths
PAD_HOURS = 8


def profile_for(cfg: ExperimentConfig, seed: int) -> ProfileTimeline:
    section = cfg.section("profile")
    if section["source"] == "csv":
        if not section["path"]:
            raise ValueError("profile.source=csv needs profile.path")
        return load_profiles(section["path"])
    return synth_profiles(season=section["season"], days=int(section["days"]), seed=seed, pad_hours=PAD_HOURS)


def decision_cap(cfg: ExperimentConfig) -> int | None:
    section = cfg.section("profile")
    if section["source"] == "csv":
        return None
    return int(section["days"]) * 24


def inputs_from(timeline: ProfileTimeline) -> TrainInputs:
    return TrainInputs(
        p_sum_kw=timeline.p_sum_kw,
        tariff_sell=timeline.tariff_sell,
        tariff_buy=timeline.tariff_buy,
        p_pcc_set_kw=timeline.p_pcc_set_kw,
    )


def flow_gate_for(cfg: ExperimentConfig) -> FlowGate | None:
    section = cfg.section("evaluation")
    if not section["flow_gate"]:
        return None
    rules = cfg.section("rules")
    template, shares = microgrid_feeder(
        ap_max_pu=float(section["feeder_ap_max_pu"]),
        r_scale=float(section["feeder_r_scale"]),
    )
    limits = GridLimits(
        p_pcc_min_kw=float(rules["pcc_inf_kw"]),
        p_pcc_max_kw=float(rules["pcc_sup_kw"]),
    )
    return FlowGate(template=template, shares=shares, limits=limits)


def save_weights(net: QNetwork, path: str, fmap, target_scale: float) -> None:
    payload = net.to_dict()
    payload["normalization"] = {"lo": fmap.lo.tolist(), "span": fmap.span.tolist(), "horizon": fmap.horizon}
    payload["target_scale"] = target_scale
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_weights(path: str):
    from .learner import FeatureMap

    with open(path) as fh:
        payload = json.load(fh)
    net = QNetwork.from_dict(payload)
    norm = payload["normalization"]
    fmap = FeatureMap.__new__(FeatureMap)
    fmap.lo = np.asarray(norm["lo"], dtype=float)
    fmap.span = np.asarray(norm["span"], dtype=float)
    fmap.horizon = int(norm["horizon"])
    return net, fmap, float(payload.get("target_scale", 1.0))


def run_training(cfg: ExperimentConfig, art: RunArtifacts) -> tuple[TrainResult, EvaluationResult]:
    system = build_system(cfg)
    learner_cfg = build_learner(cfg)
    mcts_cfg = build_mcts(cfg)
    scen = cfg.section("scenario")

    train_profile = profile_for(cfg, cfg.master_seed)
    result = train(
        system,
        inputs_from(train_profile),
        learner_cfg,
        mcts_cfg,
        master_seed=cfg.master_seed,
        sigma_kw=float(scen["sigma_kw"]),
        confidence=float(scen["confidence_level"]),
        decision_steps=decision_cap(cfg),
    )
    write_curve(result.curve, art.register("learning_curve.csv"))
    save_weights(result.net, art.register("weights.json"), result.fmap, learner_cfg.target_scale)

    from .learner import QAgent

    agent = QAgent(system=system, net=result.net, fmap=result.fmap, target_scale=learner_cfg.target_scale)
    eval_profile = profile_for(cfg, cfg.master_seed + int(cfg.section("profile")["eval_seed_offset"]))
    evaluation = evaluate_policy(
        GreedyPolicy(agent),
        system,
        inputs_from(eval_profile),
        learner_cfg.bootstrap_depth,
        sigma_kw=float(scen["sigma_kw"]),
        confidence=float(scen["confidence_level"]),
        initial_soc=initial_soc(cfg),
        flow_gate=flow_gate_for(cfg),
        components=(eval_profile.p_pv_kw, eval_profile.p_ev_kw, eval_profile.p_other_load_kw),
        decision_steps=decision_cap(cfg),
    )
    write_metrics(evaluation.metrics, art.register("metrics.csv"))
    write_trace(evaluation.trace, art.register("trace.csv"))

    if cfg.figures:
        from . import plots

        plots.save_learning_curves({cfg.preset: result.curve}, art.register("learning_curve.png"))
        plots.save_trace(evaluation.trace, art.register("trace.png"))
    return result, evaluation


def race_instance(cfg: ExperimentConfig) -> RaceInstance:
    """Desk instance for the estimator comparison: one decision moment lifted
    from the seeded synthetic profile, scenarios frozen for all estimators."""
    race = cfg.section("race")
    horizon = int(race["horizon"])
    system = build_system(cfg)
    profile = profile_for(cfg, cfg.master_seed)
    inputs = inputs_from(profile)
    t0 = int(race["decision_hour"])
    state = inputs.state(t0, initial_soc(cfg))
    from .learner import build_pool

    pool = build_pool(inputs, t0, horizon, float(race["sigma_kw"]), float(cfg.section("scenario")["confidence_level"]))
    scenarios = tuple(sample_scenarios(pool, int(race["scenarios"]), cfg.master_seed, t0))
    return RaceInstance(
        system=system,
        state=state,
        action_kw=float(race["first_action_kw"]),
        scenarios=scenarios,
        exo=inputs.exo_window(t0, horizon),
        horizon=horizon,
        gamma=float(race["gamma"]),
        dead_end_step_penalty=float(cfg.section("mcts")["dead_end_step_penalty"]),
    )


def run_race(cfg: ExperimentConfig, art: RunArtifacts) -> list[RaceRow]:
    race = cfg.section("race")
    rows = estimator_race(
        race_instance(cfg),
        budgets=tuple(int(b) for b in race["budgets"]),
        repeats=int(race["repeats"]),
        master_seed=cfg.master_seed,
        ga=GaParams(),
        mcts_beta=float(race["beta"]),
    )
    write_race(rows, art.register("race.csv"))
    if cfg.figures:
        from . import plots

        plots.save_race(rows, art.register("race.png"))
    return rows


def run_seasonal(cfg: ExperimentConfig, art: RunArtifacts) -> list[list]:
    """Paired seasonal comparison of the proposed and myopic presets."""
    from .profiles import SEASONS

    summary: list[list] = []
    curves: dict[str, list[float]] = {}
    for season in SEASONS:
        for preset in ("proposed", "rules-n1"):
            sub_raw = {
                "profile": {"season": season},
                "learner": dict(cfg.section("learner")),
                "figures": False,
                "out_dir": os.path.join(cfg.out_dir, f"{season}-{preset}"),
            }
            if preset == "rules-n1":
                sub_raw["learner"]["bootstrap_depth"] = 1
            sub_cfg = ExperimentConfig(preset=preset, raw=_merged(cfg, sub_raw))
            sub_art = RunArtifacts(out_dir=sub_cfg.out_dir)
            os.makedirs(sub_cfg.out_dir, exist_ok=True)
            write_manifest(sub_cfg, sub_art)
            result, evaluation = run_training(sub_cfg, sub_art)
            curves[f"{season}/{preset}"] = result.curve
            m = evaluation.metrics
            summary.append([season, preset, m.net_revenue, m.pcc_sd_kw])
    _write_csv(art.register("seasonal_summary.csv"), ["season", "method", "net_revenue", "pcc_sd_kw"], summary)
    if cfg.figures:
        from . import plots

        plots.save_learning_curves(curves, art.register("seasonal_curves.png"))
    return summary


def _merged(cfg: ExperimentConfig, override: dict) -> dict:
    from .config import _merge

    return _merge(cfg.raw, override)


def run_preset(cfg: ExperimentConfig) -> RunArtifacts:
    """Execute the configured preset and write its artifact set."""
    art = RunArtifacts(out_dir=cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_manifest(cfg, art)
    if cfg.preset in TRAINING_PRESETS:
        run_training(cfg, art)
    elif cfg.preset == "baseline-race":
        run_race(cfg, art)
    elif cfg.preset == "seasonal-compare":
        run_seasonal(cfg, art)
    else:
        raise ValueError(f"preset {cfg.preset!r} has no runner")
    return art


def run_simulate(cfg: ExperimentConfig, policy_spec: str = "zero") -> RunArtifacts:
    """Roll a fixed policy over the evaluation profile."""
    art = RunArtifacts(out_dir=cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_manifest(cfg, art)
    system = build_system(cfg)
    horizon = int(cfg.section("learner")["bootstrap_depth"])
    scen = cfg.section("scenario")
    profile = profile_for(cfg, cfg.master_seed)
    if policy_spec == "zero":
        policy = FixedPolicy(0.0)
    elif policy_spec.startswith("constant:"):
        policy = FixedPolicy(float(policy_spec.split(":", 1)[1]))
    else:
        raise ValueError(f"unknown policy {policy_spec!r}; use zero or constant:<kw>")
    evaluation = evaluate_policy(
        policy,
        system,
        inputs_from(profile),
        horizon,
        sigma_kw=float(scen["sigma_kw"]),
        confidence=float(scen["confidence_level"]),
        initial_soc=initial_soc(cfg),
        flow_gate=flow_gate_for(cfg),
        components=(profile.p_pv_kw, profile.p_ev_kw, profile.p_other_load_kw),
        decision_steps=decision_cap(cfg),
    )
    write_metrics(evaluation.metrics, art.register("metrics.csv"))
    write_trace(evaluation.trace, art.register("trace.csv"))
    if cfg.figures:
        from . import plots

        plots.save_trace(evaluation.trace, art.register("trace.png"))
    return art


def run_evaluate(cfg: ExperimentConfig, weights_path: str) -> RunArtifacts:
    """Greedy evaluation of serialized weights on the configured profile."""
    art = RunArtifacts(out_dir=cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_manifest(cfg, art)
    system = build_system(cfg)
    scen = cfg.section("scenario")
    net, fmap, target_scale = load_weights(weights_path)
    from .learner import QAgent

    agent = QAgent(system=system, net=net, fmap=fmap, target_scale=target_scale)
    profile = profile_for(cfg, cfg.master_seed)
    evaluation = evaluate_policy(
        GreedyPolicy(agent),
        system,
        inputs_from(profile),
        fmap.horizon,
        sigma_kw=float(scen["sigma_kw"]),
        confidence=float(scen["confidence_level"]),
        initial_soc=initial_soc(cfg),
        flow_gate=flow_gate_for(cfg),
        components=(profile.p_pv_kw, profile.p_ev_kw, profile.p_other_load_kw),
        decision_steps=decision_cap(cfg),
    )
    write_metrics(evaluation.metrics, art.register("metrics.csv"))
    write_trace(evaluation.trace, art.register("trace.csv"))
    if cfg.figures:
        from . import plots

        plots.save_trace(evaluation.trace, art.register("trace.png"))
    return art


def run_synth(cfg: ExperimentConfig) -> RunArtifacts:
    """Emit the configured synthetic profile as a CSV (plus a figure)."""
    art = RunArtifacts(out_dir=cfg.out_dir)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_manifest(cfg, art)
    profile = profile_for(cfg, cfg.master_seed)
    write_profile(profile, art.register("profile.csv"))
    if cfg.figures:
        from . import plots

        plots.save_profile(profile, art.register("profile.png"))
    return art
