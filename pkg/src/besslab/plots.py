"""Figure rendering for run reports.

Every report path drops PNG figures next to the delimited output. The CSVs
stay the canonical artifacts; figures are the quick-look companions.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import TraceRow
from .profiles import ProfileTimeline


def save_learning_curves(curves: dict[str, list[float]], path: str) -> None:
    """Cumulative reward per episode, one line per algorithm variant."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, curve in curves.items():
        ax.plot(range(1, len(curve) + 1), curve, marker="o", ms=3, label=label)
    ax.set_xlabel("episode")
    ax.set_ylabel("cumulative reward")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace(trace: list[TraceRow], path: str) -> None:
    """PCC tracking, battery action and SOC over the evaluation window."""
    t = [row.t for row in trace]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax0.plot(t, [row.p_pcc_kw for row in trace], label="P_PCC")
    ax0.plot(t, [row.p_pcc_set_kw for row in trace], "--", label="setpoint")
    ax0.set_ylabel("kW")
    ax0.legend(loc="upper right")
    ax0.grid(alpha=0.3)
    ax1.step(t, [row.p_b_kw for row in trace], where="post", label="battery power", color="tab:green")
    ax1.set_ylabel("kW")
    ax1.set_xlabel("hour")
    ax1.grid(alpha=0.3)
    ax2 = ax1.twinx()
    ax2.plot(t, [row.soc for row in trace], color="tab:red", label="SOC")
    ax2.set_ylabel("SOC")
    ax2.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_race(rows, path: str) -> None:
    """Normalized mean estimate (and repeat variance) versus budget."""
    by_est: dict[str, dict[int, tuple[float, float]]] = {}
    for row in rows:
        by_est.setdefault(row.estimator, {})[row.budget] = (row.normalized_mean, row.variance)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 4))
    for est, per_budget in sorted(by_est.items()):
        budgets = sorted(per_budget)
        ax0.plot(budgets, [per_budget[b][0] for b in budgets], marker="o", label=est)
        ax1.plot(budgets, [per_budget[b][1] for b in budgets], marker="o", label=est)
    for ax, title in ((ax0, "normalized mean"), (ax1, "variance")):
        ax.set_xscale("log")
        ax.set_xlabel("iterations")
        ax.set_title(title)
        ax.grid(alpha=0.3)
    ax0.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_profile(timeline: ProfileTimeline, path: str) -> None:
    """Component powers, net injection and tariff of a profile."""
    t = np.arange(timeline.steps)
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax0.plot(t, timeline.p_pv_kw, label="pv")
    ax0.plot(t, -timeline.p_ev_kw, label="-ev")
    ax0.plot(t, -timeline.p_other_load_kw, label="-load")
    ax0.plot(t, timeline.p_sum_kw, "k", lw=1.5, label="net injection")
    ax0.set_ylabel("kW")
    ax0.legend(ncol=4, fontsize=8)
    ax0.grid(alpha=0.3)
    ax1.step(t, timeline.tariff_buy, where="post")
    ax1.set_ylabel("tariff")
    ax1.set_xlabel("hour")
    ax1.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
