"""Small fixture builders shared across test modules."""

from __future__ import annotations

from decimal import Decimal
from typing import Sequence

from cascade_opt import CascadeRecord, ModelOutput, ModelSpec


def fixed_specs(costs_micro: Sequence[int]) -> list[ModelSpec]:
    """Flat-priced cascade with the given per-query micro-dollar costs."""
    return [
        ModelSpec(
            model_id=f"m{j + 1}",
            position=j + 1,
            input_price_per_m=0,
            output_price_per_m=0,
            fixed_cost=Decimal(cost) / 1_000_000,
        )
        for j, cost in enumerate(costs_micro)
    ]


def token_specs(prices: Sequence[tuple[float, float]]) -> list[ModelSpec]:
    """Token-priced cascade from (input, output) dollars per million."""
    return [
        ModelSpec(
            model_id=f"m{j + 1}",
            position=j + 1,
            input_price_per_m=p_in,
            output_price_per_m=p_out,
        )
        for j, (p_in, p_out) in enumerate(prices)
    ]


def make_record(
    question_id: str,
    samples_per_model: Sequence[Sequence[str]],
    input_tokens: int | None = 100,
    output_tokens: int | None = 100,
    confidences: Sequence[float | None] | None = None,
    ground_truth: str | None = None,
) -> CascadeRecord:
    confs: Sequence[float | None] = (
        confidences if confidences is not None else [None] * len(samples_per_model)
    )
    return CascadeRecord(
        question_id=question_id,
        question=f"question {question_id}",
        outputs=tuple(
            ModelOutput(
                model_id=f"m{j + 1}",
                samples=tuple(samples),
                input_tokens=input_tokens,
                output_tokens=output_tokens,
                confidence=confs[j],
            )
            for j, samples in enumerate(samples_per_model)
        ),
        ground_truth=ground_truth,
    )
