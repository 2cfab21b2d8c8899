"""Exhaustive threshold-grid search with a calibration cost-quantile gate.

The 0-1 regret surface is piecewise constant in the thresholds (moving a
threshold between two attained confidence values changes nothing), so
gradient methods see zero gradient almost everywhere and the search simply
enumerates the full grid.  A candidate is kept only when the order
statistic C_(k) of its calibration costs, k = ceil((n_cal + 1) * (1 -
alpha)), fits the budget; among the kept candidates the one with the
lowest selection-half regret wins, with ties broken by lower total
calibration cost and then lexicographically smaller thresholds, making the
result a total order independent of enumeration or machine.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cascade import ScoredRecord, ThresholdVector, score_records
from .records import DatasetSplit, ModelSpec, query_cost
from .scoring import score_output

logger = logging.getLogger(__name__)

# Tie-break key of one accepted candidate: selection-half error count,
# total calibration cost, then the threshold tuple itself.
_CandidateKey = tuple[int, int, tuple[float, ...]]


@dataclass(frozen=True)
class GridSpec:
    """Threshold grid shape: resolution per position and cascade size."""

    grid_resolution: int
    num_models: int

    def __post_init__(self) -> None:
        if self.grid_resolution < 3:
            raise ValueError(
                f"grid resolution must be >= 3, got {self.grid_resolution}"
            )
        if self.num_models < 2:
            raise ValueError(f"cascade needs >= 2 models, got {self.num_models}")

    @property
    def candidate_count(self) -> int:
        return self.grid_resolution ** (self.num_models - 1)


def build_grid(grid: GridSpec) -> tuple[tuple[float, ...], ...]:
    """Candidate threshold values per position.

    Each non-final position gets {k / (K - 2) : k = 0..K-1}, which spans 0
    (always exit) through (K - 1) / (K - 2) > 1 (never exit, skipping the
    position).  The final position is pinned to {0}.
    """
    K = grid.grid_resolution
    levels = tuple(k / (K - 2) for k in range(K))
    return (levels,) * (grid.num_models - 1) + ((0.0,),)


def cost_quantile_index(n_cal: int, alpha: float) -> int:
    """1-based order-statistic index ceil((n_cal + 1) * (1 - alpha)).

    May exceed n_cal for small calibration sets, in which case no finite
    sample quantile certifies the budget.
    """
    if n_cal < 1:
        raise ValueError(f"need at least 1 calibration record, got {n_cal}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.ceil((n_cal + 1) * (1.0 - alpha))


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of the grid search.

    When no candidate fits the budget, feasible is False, best_tau falls
    back to the all-zero vector (always exit at the first model),
    best_regret is +inf, and cal_cost_quantile is None.
    """

    best_tau: ThresholdVector
    best_regret: float
    cal_cost_quantile: int | None
    feasible: bool
    candidates_evaluated: int
    accepted_count: int


def _validate_search_args(split: DatasetSplit, grid: GridSpec,
                          budget: int, specs: Sequence[ModelSpec]) -> None:
    if len(specs) != grid.num_models:
        raise ValueError(
            f"grid is for {grid.num_models} models but cascade has {len(specs)}"
        )
    if budget < 0:
        raise ValueError(f"budget must be >= 0 micro-dollars, got {budget}")
    for record in itertools.chain(split.ss, split.cal):
        if record.num_models != grid.num_models:
            raise ValueError(
                f"record {record.question_id!r} has {record.num_models} outputs, "
                f"grid expects {grid.num_models}"
            )


def _search_arrays(scored: Sequence[ScoredRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scores = np.array([s.scores for s in scored], dtype=np.float64)
    wrong = 1 - np.array([s.agrees_final for s in scored], dtype=np.int64)
    prefix = np.array([s.prefix_costs for s in scored], dtype=np.int64)
    return scores, wrong, prefix


def _infeasible_result(grid: GridSpec, accepted: int = 0) -> OptimizationResult:
    return OptimizationResult(
        best_tau=ThresholdVector.all_zero(grid.num_models, grid.grid_resolution),
        best_regret=math.inf,
        cal_cost_quantile=None,
        feasible=False,
        candidates_evaluated=grid.candidate_count,
        accepted_count=accepted,
    )


def _scan_candidates(
    candidates: Iterable[tuple[float, ...]],
    ss_scores: np.ndarray,
    ss_wrong: np.ndarray,
    cal_scores: np.ndarray,
    cal_prefix: np.ndarray,
    k: int,
    budget: int,
    worst_case_cost: int,
) -> tuple[int, _CandidateKey | None, int | None]:
    """Scan a candidate slice; returns (accepted, best key, its quantile)."""
    n_ss = ss_scores.shape[0]
    n_cal = cal_scores.shape[0]
    ss_rows = np.arange(n_ss)
    cal_rows = np.arange(n_cal)
    accepted = 0
    best_key: _CandidateKey | None = None
    best_quantile: int | None = None
    for combo in candidates:
        tau_row = np.array(combo + (0.0,), dtype=np.float64)
        cal_exits = (cal_scores >= tau_row).argmax(axis=1)
        costs = cal_prefix[cal_rows, cal_exits]
        if k <= n_cal:
            quantile = int(np.partition(costs, k - 1)[k - 1])
        else:
            # Too few calibration points for the requested confidence; only
            # a budget covering the worst full-cascade cost is safe.
            quantile = worst_case_cost
        if quantile > budget:
            continue
        accepted += 1
        ss_exits = (ss_scores >= tau_row).argmax(axis=1)
        key = (
            int(ss_wrong[ss_rows, ss_exits].sum()),
            int(costs.sum()),
            combo,
        )
        if best_key is None or key < best_key:
            best_key = key
            best_quantile = quantile
    return accepted, best_key, best_quantile


def optimize(
    split: DatasetSplit,
    grid: GridSpec,
    budget: int,
    alpha: float,
    specs: Sequence[ModelSpec],
    jobs: int = 1,
) -> OptimizationResult:
    """Search the full threshold grid for the cheapest-certifiable regret.

    budget is in micro-dollars.  jobs > 1 splits the candidate list across
    worker threads; the tie-break key makes the merged result identical for
    every jobs value.
    """
    _validate_search_args(split, grid, budget, specs)
    k = cost_quantile_index(len(split.cal), alpha)
    ss_scores, ss_wrong, _ = _search_arrays(score_records(split.ss, specs))
    cal_scores, _, cal_prefix = _search_arrays(score_records(split.cal, specs))
    worst_case_cost = int(cal_prefix[:, -1].max())

    all_candidates = list(itertools.product(*build_grid(grid)[:-1]))
    jobs = max(1, min(jobs, len(all_candidates)))
    chunk_size = math.ceil(len(all_candidates) / jobs)
    chunks = [
        all_candidates[i:i + chunk_size]
        for i in range(0, len(all_candidates), chunk_size)
    ]

    def scan(chunk: list[tuple[float, ...]]):
        return _scan_candidates(
            chunk, ss_scores, ss_wrong, cal_scores, cal_prefix,
            k, budget, worst_case_cost,
        )

    if len(chunks) == 1:
        partials = [scan(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            partials = list(pool.map(scan, chunks))

    accepted = sum(p[0] for p in partials)
    best: tuple[_CandidateKey, int] | None = None
    for _, key, quantile in partials:
        if key is not None and (best is None or key < best[0]):
            best = (key, quantile)  # type: ignore[arg-type]
    logger.debug(
        "grid search: %d candidates, %d accepted within budget %d",
        len(all_candidates), accepted, budget,
    )
    if best is None:
        return _infeasible_result(grid)
    (wrong_count, _, combo), quantile = best
    return OptimizationResult(
        best_tau=ThresholdVector(combo + (0.0,), grid.grid_resolution),
        best_regret=wrong_count / len(split.ss),
        cal_cost_quantile=quantile,
        feasible=True,
        candidates_evaluated=len(all_candidates),
        accepted_count=accepted,
    )


def oracle_optimize(
    split: DatasetSplit,
    grid: GridSpec,
    budget: int,
    alpha: float,
    specs: Sequence[ModelSpec],
) -> OptimizationResult:
    """Plain nested-loop twin of optimize for differential testing.

    Re-derives every quantity with scalar loops and naive sorting; kept
    deliberately free of array code so the two implementations can only
    agree by computing the same thing.
    """
    _validate_search_args(split, grid, budget, specs)
    m = grid.num_models
    K = grid.grid_resolution
    levels = [k / (K - 2) for k in range(K)]

    def prepare(records) -> list[tuple[list[float], list[int], list[int]]]:
        rows = []
        for record in records:
            scores: list[float] = []
            answers: list[str] = []
            prefix: list[int] = []
            total = 0
            for pos in range(1, m + 1):
                out = record.outputs[pos - 1]
                scored = score_output(out, pos, m)
                scores.append(scored.confidence)
                answers.append(scored.answer)
                total = total + query_cost(out, specs[pos - 1])
                prefix.append(total)
            wrong = [0 if a == answers[m - 1] else 1 for a in answers]
            rows.append((scores, wrong, prefix))
        return rows

    ss_rows = prepare(split.ss)
    cal_rows = prepare(split.cal)
    n_ss = len(ss_rows)
    n_cal = len(cal_rows)
    k_index = math.ceil((n_cal + 1) * (1.0 - alpha))

    worst_case = 0
    for _, _, prefix in cal_rows:
        if prefix[m - 1] > worst_case:
            worst_case = prefix[m - 1]

    def exit_at(scores: list[float], combo: tuple[float, ...]) -> int:
        for j in range(m):
            tau_j = combo[j] if j < m - 1 else 0.0
            if scores[j] >= tau_j:
                return j + 1
        raise AssertionError("final position must exit")

    best_key: _CandidateKey | None = None
    best_quantile: int | None = None
    accepted = 0
    evaluated = 0
    for combo in itertools.product(levels, repeat=m - 1):
        evaluated += 1
        costs = []
        total_cal = 0
        for scores, _, prefix in cal_rows:
            c = prefix[exit_at(scores, combo) - 1]
            costs.append(c)
            total_cal += c
        if k_index <= n_cal:
            quantile = sorted(costs)[k_index - 1]
        else:
            quantile = worst_case
        if quantile > budget:
            continue
        accepted += 1
        wrong_count = 0
        for scores, wrong, _ in ss_rows:
            wrong_count += wrong[exit_at(scores, combo) - 1]
        key = (wrong_count, total_cal, combo)
        if best_key is None or key < best_key:
            best_key = key
            best_quantile = quantile

    if best_key is None:
        return _infeasible_result(grid)
    return OptimizationResult(
        best_tau=ThresholdVector(best_key[2] + (0.0,), K),
        best_regret=best_key[0] / n_ss,
        cal_cost_quantile=best_quantile,
        feasible=True,
        candidates_evaluated=evaluated,
        accepted_count=accepted,
    )
