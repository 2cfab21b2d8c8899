"""Early-exit rule and per-record cascade evaluation.

A threshold vector assigns one confidence threshold per cascade position;
the cascade answers at the first position whose confidence reaches its
threshold.  The final threshold is pinned to 0 and the final confidence to
1, so an exit always happens.  Thresholds above 1 make a position
impossible to exit at, which skips that model's answer while still paying
for its query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .records import CascadeRecord, ModelSpec, query_cost
from .scoring import regret_loss, score_output


@dataclass(frozen=True)
class ThresholdVector:
    """Per-position exit thresholds; the last entry is always 0."""

    taus: tuple[float, ...]
    grid_resolution: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if len(self.taus) < 2:
            raise ValueError("threshold vector needs at least 2 positions")
        if self.taus[-1] != 0.0:
            raise ValueError(f"final threshold must be 0, got {self.taus[-1]}")
        if any(t < 0.0 for t in self.taus):
            raise ValueError("thresholds must be non-negative")

    @property
    def num_models(self) -> int:
        return len(self.taus)

    @classmethod
    def all_zero(cls, num_models: int, grid_resolution: int | None = None) -> "ThresholdVector":
        """Always exit at the first model."""
        return cls(taus=(0.0,) * num_models, grid_resolution=grid_resolution)

    @classmethod
    def all_skip(cls, num_models: int, grid_resolution: int) -> "ThresholdVector":
        """Never exit early: every non-final threshold sits above 1."""
        top = (grid_resolution - 1) / (grid_resolution - 2)
        return cls(
            taus=(top,) * (num_models - 1) + (0.0,),
            grid_resolution=grid_resolution,
        )


@dataclass(frozen=True)
class CascadeOutcome:
    """Result of running the early-exit cascade on one record."""

    exit_position: int
    answer: str
    cost: int
    regret_vs_mpm: int


@dataclass(frozen=True)
class ScoredRecord:
    """Precomputed per-position scores and cumulative costs for one record.

    prefix_costs[j] is the total micro-dollar cost of querying positions
    1..j+1; agrees_final[j] is 1 when position j+1's answer matches the
    final model's answer.
    """

    record: CascadeRecord
    scores: tuple[float, ...]
    answers: tuple[str, ...]
    prefix_costs: tuple[int, ...]
    agrees_final: tuple[int, ...]


def score_records(
    records: Sequence[CascadeRecord],
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> list[ScoredRecord]:
    """Score every record once so searches can reuse the arrays."""
    scored: list[ScoredRecord] = []
    m = len(specs)
    for record in records:
        if record.num_models != m:
            raise ValueError(
                f"record {record.question_id!r} has {record.num_models} outputs, "
                f"cascade has {m}"
            )
        outs = [
            score_output(out, pos, m)
            for pos, out in enumerate(record.outputs, start=1)
        ]
        prefix: list[int] = []
        running = 0
        for out, spec in zip(record.outputs, specs):
            running += query_cost(out, spec, output_token_cap=output_token_cap)
            prefix.append(running)
        final_answer = outs[-1].answer
        scored.append(
            ScoredRecord(
                record=record,
                scores=tuple(o.confidence for o in outs),
                answers=tuple(o.answer for o in outs),
                prefix_costs=tuple(prefix),
                agrees_final=tuple(
                    1 - regret_loss(o.answer, final_answer) for o in outs
                ),
            )
        )
    return scored


def exit_index(scores: Sequence[float], taus: ThresholdVector | Sequence[float]) -> int:
    """First position (1-based) whose confidence reaches its threshold.

    With the final confidence pinned to 1 and the final threshold to 0 the
    result always lies in 1..m.
    """
    tau_values = taus.taus if isinstance(taus, ThresholdVector) else tuple(taus)
    if len(scores) != len(tau_values):
        raise ValueError(
            f"got {len(scores)} scores for {len(tau_values)} thresholds"
        )
    for j, (score, tau) in enumerate(zip(scores, tau_values), start=1):
        if score >= tau:
            return j
    raise ValueError("no position satisfied its threshold; final threshold must be 0")


def _outcome_from_scored(scored: ScoredRecord, taus: ThresholdVector) -> CascadeOutcome:
    z = exit_index(scored.scores, taus)
    return CascadeOutcome(
        exit_position=z,
        answer=scored.answers[z - 1],
        cost=scored.prefix_costs[z - 1],
        regret_vs_mpm=1 - scored.agrees_final[z - 1],
    )


def evaluate_record(
    record: CascadeRecord,
    taus: ThresholdVector,
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> CascadeOutcome:
    """Run the cascade on one record.

    The cost sums the queries of every position up to and including the
    exit, whether or not a threshold skipped their answers.  Regret is the
    0-1 disagreement with the final model's answer, so exiting at the final
    position always has regret 0.
    """
    (scored,) = score_records([record], specs, output_token_cap=output_token_cap)
    return _outcome_from_scored(scored, taus)


def outcomes(
    scored_records: Sequence[ScoredRecord], taus: ThresholdVector
) -> list[CascadeOutcome]:
    """Cascade outcomes for already-scored records."""
    return [_outcome_from_scored(s, taus) for s in scored_records]


def empirical_regret(
    records: Sequence[CascadeRecord],
    taus: ThresholdVector,
    specs: Sequence[ModelSpec],
) -> float:
    """Mean 0-1 regret of the cascade against the final model.

    An integer count divided by the record count, so the value is exact and
    independent of evaluation order.
    """
    if not records:
        raise ValueError("cannot average regret over zero records")
    total = sum(
        evaluate_record(record, taus, specs).regret_vs_mpm for record in records
    )
    return total / len(records)
