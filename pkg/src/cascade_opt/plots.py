"""Figure rendering for report outputs.

Every report path that writes a CSV or JSON table also renders a PNG next
to it.  The Agg backend and pinned metadata keep the bytes reproducible
run to run.
"""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport, SweepRow
from .records import micro_to_dollars
from .simulator import TrialResult, TrialSummary

_METADATA = {"Software": "cascade-opt"}
_DPI = 120


def _save(fig: "plt.Figure", path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_METADATA)
    plt.close(fig)


def save_sweep_figure(rows: Sequence[SweepRow], path: str) -> None:
    """Regret and mean cost against the budget axis."""
    budgets = [micro_to_dollars(r.budget) for r in rows]
    fig, (ax_regret, ax_cost) = plt.subplots(1, 2, figsize=(10, 4))
    ax_regret.plot(budgets, [r.regret_vs_mpm for r in rows],
                   marker="o", label="regret vs final model")
    train = [(b, r.best_regret) for b, r in zip(budgets, rows)
             if not math.isinf(r.best_regret)]
    if train:
        ax_regret.plot([b for b, _ in train], [t for _, t in train],
                       marker="s", linestyle="--", label="selection regret")
    if all(r.accuracy is not None for r in rows):
        ax_regret.plot(budgets, [r.accuracy for r in rows],
                       marker="^", label="accuracy")
    ax_regret.set_xlabel("budget (dollars)")
    ax_regret.set_ylabel("rate")
    ax_regret.set_title("quality vs budget")
    ax_regret.legend(fontsize=8)
    ax_cost.plot(budgets, [micro_to_dollars(r.mean_cost) for r in rows], marker="o")
    ax_cost.plot(budgets, budgets, linestyle=":", color="gray")
    ax_cost.set_xlabel("budget (dollars)")
    ax_cost.set_ylabel("mean cost (dollars)")
    ax_cost.set_title("spend vs budget")
    fig.tight_layout()
    _save(fig, path)


def save_trials_figure(
    trials: Sequence[TrialResult], summary: TrialSummary, path: str
) -> None:
    """Per-trial violation rates and the train-test regret gap spread."""
    fig, (ax_viol, ax_gap) = plt.subplots(1, 2, figsize=(10, 4))
    certified = [t for t in trials if t.certified]
    ax_viol.scatter(
        [t.index for t in certified],
        [t.violation_rate for t in certified],
        s=10, alpha=0.6,
    )
    ax_viol.axhline(summary.alpha, color="red", linestyle="--",
                    label=f"alpha = {summary.alpha}")
    if summary.pooled_violation_rate is not None:
        ax_viol.axhline(summary.pooled_violation_rate, color="black",
                        label="pooled rate")
    ax_viol.set_xlabel("trial")
    ax_viol.set_ylabel("test violation rate")
    ax_viol.set_title("budget violations per certified trial")
    ax_viol.legend(fontsize=8)
    gaps = [t.test_regret - t.train_regret for t in trials
            if not math.isinf(t.train_regret)]
    if gaps:
        ax_gap.hist(gaps, bins=30)
    ax_gap.axvline(summary.epsilon, color="red", linestyle="--",
                   label="generalization radius")
    ax_gap.axvline(-summary.epsilon, color="red", linestyle="--")
    ax_gap.set_xlabel("test regret - train regret")
    ax_gap.set_ylabel("trials")
    ax_gap.set_title("regret gap vs bound")
    ax_gap.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def save_evaluation_figure(report: EvalReport, path: str) -> None:
    """Exit-position counts and the cost quantile ladder."""
    fig, (ax_exit, ax_cost) = plt.subplots(1, 2, figsize=(10, 4))
    positions = list(range(1, len(report.exit_histogram) + 1))
    ax_exit.bar(positions, report.exit_histogram)
    ax_exit.set_xticks(positions)
    ax_exit.set_xlabel("exit position")
    ax_exit.set_ylabel("records")
    ax_exit.set_title("where the cascade answered")
    labels = [f"p{int(p * 100)}" for p, _ in report.cost_quantiles]
    values = [micro_to_dollars(c) for _, c in report.cost_quantiles]
    ax_cost.bar(labels, values)
    ax_cost.axhline(micro_to_dollars(report.budget), color="red",
                    linestyle="--", label="budget")
    ax_cost.set_ylabel("cost (dollars)")
    ax_cost.set_title("cost quantiles")
    ax_cost.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
