"""Policy files, held-out evaluation, budget sweeps, and replay execution.

A policy bundles learned thresholds with the budget and certificate they
were learned under, plus provenance (dataset hash, seed, tool version) so
reports can be traced to their inputs.  Costs stay in micro-dollars here;
dollars appear only in rendered output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

from .cascade import (
    CascadeOutcome,
    ThresholdVector,
    outcomes,
    score_records,
)
from .conformal import CertificationReport
from .optimizer import GridSpec, OptimizationResult, optimize
from .records import (
    CascadeRecord,
    DatasetSplit,
    ModelOutput,
    ModelSpec,
    micro_to_dollars,
    query_cost,
)
from .scoring import canonicalize, score_output

REPORT_QUANTILES = (0.5, 0.9, 0.95, 0.99)


@dataclass(frozen=True)
class Policy:
    """Learned thresholds plus the budget contract they certify."""

    taus: ThresholdVector
    alpha: float
    budget: int
    certification: CertificationReport | None = None
    provenance: dict[str, Any] | None = None
    optimization: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "taus": list(self.taus.taus),
            "grid_resolution": self.taus.grid_resolution,
            "alpha": self.alpha,
            "budget_micro": self.budget,
            "budget_dollars": micro_to_dollars(self.budget),
            "certification": (
                None if self.certification is None else self.certification.to_dict()
            ),
            "provenance": self.provenance,
            "optimization": self.optimization,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "Policy":
        cert = payload.get("certification")
        return cls(
            taus=ThresholdVector(
                taus=tuple(payload["taus"]),
                grid_resolution=payload.get("grid_resolution"),
            ),
            alpha=payload["alpha"],
            budget=payload["budget_micro"],
            certification=None if cert is None else CertificationReport.from_dict(cert),
            provenance=payload.get("provenance"),
            optimization=payload.get("optimization"),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Policy":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def policy_from_result(
    result: OptimizationResult,
    alpha: float,
    budget: int,
    certification: CertificationReport | None = None,
    provenance: dict[str, Any] | None = None,
) -> Policy:
    """Package a search result as a policy, keeping the search diagnostics."""
    return Policy(
        taus=result.best_tau,
        alpha=alpha,
        budget=budget,
        certification=certification,
        provenance=provenance,
        optimization={
            "best_regret": None if math.isinf(result.best_regret) else result.best_regret,
            "cal_cost_quantile_micro": result.cal_cost_quantile,
            "feasible": result.feasible,
            "candidates_evaluated": result.candidates_evaluated,
            "accepted_count": result.accepted_count,
        },
    )


@dataclass(frozen=True)
class EvalReport:
    """Held-out metrics of one policy.

    mean_cost and the quantiles are micro-dollars; cost_quantiles pairs
    each probability with the order statistic at index
    min(ceil((n + 1) * p), n).  accuracy_vs_ground_truth is None when no
    record carries a ground truth.  exit_histogram counts exits per
    cascade position and sums to n_test.
    """

    n_test: int
    accuracy_vs_ground_truth: float | None
    regret_vs_mpm: float
    mean_cost: float
    cost_quantiles: tuple[tuple[float, int], ...]
    violation_rate: float
    exit_histogram: tuple[int, ...]
    budget: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_test": self.n_test,
            "accuracy_vs_ground_truth": self.accuracy_vs_ground_truth,
            "regret_vs_mpm": self.regret_vs_mpm,
            "mean_cost_micro": self.mean_cost,
            "mean_cost_dollars": micro_to_dollars(self.mean_cost),
            "cost_quantiles_micro": [[p, c] for p, c in self.cost_quantiles],
            "violation_rate": self.violation_rate,
            "exit_histogram": list(self.exit_histogram),
            "budget_micro": self.budget,
        }


def _order_statistic(sorted_costs: list[int], p: float) -> int:
    n = len(sorted_costs)
    idx = min(math.ceil((n + 1) * p), n)
    return sorted_costs[max(idx, 1) - 1]


def evaluate_policy(
    policy: Policy,
    records: Sequence[CascadeRecord],
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> EvalReport:
    """Run a policy over held-out records and aggregate the outcomes."""
    if not records:
        raise ValueError("cannot evaluate on zero records")
    scored = score_records(records, specs, output_token_cap=output_token_cap)
    outs = outcomes(scored, policy.taus)
    n = len(outs)
    histogram = [0] * policy.taus.num_models
    for o in outs:
        histogram[o.exit_position - 1] += 1
    with_truth = [
        (o, r.ground_truth)
        for o, r in zip(outs, records)
        if r.ground_truth is not None
    ]
    accuracy = None
    if with_truth:
        correct = sum(
            1 for o, truth in with_truth if o.answer == canonicalize(truth)
        )
        accuracy = correct / len(with_truth)
    sorted_costs = sorted(o.cost for o in outs)
    return EvalReport(
        n_test=n,
        accuracy_vs_ground_truth=accuracy,
        regret_vs_mpm=sum(o.regret_vs_mpm for o in outs) / n,
        mean_cost=sum(o.cost for o in outs) / n,
        cost_quantiles=tuple(
            (p, _order_statistic(sorted_costs, p)) for p in REPORT_QUANTILES
        ),
        violation_rate=sum(1 for o in outs if o.cost > policy.budget) / n,
        exit_histogram=tuple(histogram),
        budget=policy.budget,
    )


def replay_backend(record: CascadeRecord, position: int) -> ModelOutput:
    """Serve the cached output for one cascade position (1-based)."""
    if not 1 <= position <= record.num_models:
        raise ValueError(
            f"position {position} outside 1..{record.num_models} "
            f"for record {record.question_id!r}"
        )
    return record.outputs[position - 1]


def execute_record(
    record: CascadeRecord,
    taus: ThresholdVector,
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> CascadeOutcome:
    """Replay one record through the cascade strictly in position order.

    Queries the replay backend one position at a time and stops at the
    first confident answer, exactly as a live executor would; later
    positions are touched only afterwards to settle the regret
    bookkeeping.
    """
    m = taus.num_models
    if record.num_models != m:
        raise ValueError(
            f"record {record.question_id!r} has {record.num_models} outputs, "
            f"policy expects {m}"
        )
    cost = 0
    exit_position = None
    answer = ""
    for position in range(1, m + 1):
        out = replay_backend(record, position)
        cost += query_cost(out, specs[position - 1], output_token_cap=output_token_cap)
        scored = score_output(out, position, m)
        if scored.confidence >= taus.taus[position - 1]:
            exit_position = position
            answer = scored.answer
            break
    assert exit_position is not None  # final threshold is 0
    final_answer = score_output(record.outputs[m - 1], m, m).answer
    return CascadeOutcome(
        exit_position=exit_position,
        answer=answer,
        cost=cost,
        regret_vs_mpm=0 if answer == final_answer else 1,
    )


@dataclass(frozen=True)
class SweepRow:
    """One budget level of a sweep: search diagnostics plus test metrics."""

    budget: int
    feasible: bool
    best_regret: float
    taus: tuple[float, ...]
    mean_cost: float
    violation_rate: float
    regret_vs_mpm: float
    accuracy: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "budget_micro": self.budget,
            "budget_dollars": micro_to_dollars(self.budget),
            "feasible": self.feasible,
            "best_regret": None if math.isinf(self.best_regret) else self.best_regret,
            "taus": list(self.taus),
            "mean_cost_micro": self.mean_cost,
            "mean_cost_dollars": micro_to_dollars(self.mean_cost),
            "violation_rate": self.violation_rate,
            "regret_vs_mpm": self.regret_vs_mpm,
            "accuracy": self.accuracy,
        }


def sweep_budgets(
    split: DatasetSplit,
    grid: GridSpec,
    budgets: Sequence[int],
    alpha: float,
    specs: Sequence[ModelSpec],
    test_records: Sequence[CascadeRecord],
    jobs: int = 1,
) -> list[SweepRow]:
    """Trace the cost-regret frontier over strictly ascending budgets.

    Each budget gets a full search; the selected policy is then measured
    on the held-out records.  Infeasible budgets keep the all-zero
    fallback vector and are flagged, so every row stays comparable.
    Nested feasible sets make best_regret non-increasing down the rows.
    """
    if not budgets:
        raise ValueError("need at least one budget")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError(f"budgets must be strictly ascending, got {list(budgets)}")
    if not test_records:
        raise ValueError("cannot sweep with zero test records")
    scored_test = score_records(test_records, specs)
    truths = [
        None if r.ground_truth is None else canonicalize(r.ground_truth)
        for r in test_records
    ]
    rows: list[SweepRow] = []
    for budget in budgets:
        result = optimize(split, grid, budget, alpha, specs, jobs=jobs)
        outs = outcomes(scored_test, result.best_tau)
        n = len(outs)
        with_truth = [(o, t) for o, t in zip(outs, truths) if t is not None]
        accuracy = (
            sum(1 for o, t in with_truth if o.answer == t) / len(with_truth)
            if with_truth
            else None
        )
        rows.append(
            SweepRow(
                budget=budget,
                feasible=result.feasible,
                best_regret=result.best_regret,
                taus=result.best_tau.taus,
                mean_cost=sum(o.cost for o in outs) / n,
                violation_rate=sum(1 for o in outs if o.cost > budget) / n,
                regret_vs_mpm=sum(o.regret_vs_mpm for o in outs) / n,
                accuracy=accuracy,
            )
        )
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str) -> None:
    """Write the sweep table with dollar figures for budget and cost."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("budget,mean_cost,violation_rate,regret_vs_mpm,accuracy\n")
        for row in rows:
            accuracy = "" if row.accuracy is None else repr(row.accuracy)
            fh.write(
                f"{micro_to_dollars(row.budget)!r},{micro_to_dollars(row.mean_cost)!r},"
                f"{row.violation_rate!r},{row.regret_vs_mpm!r},{accuracy}\n"
            )
