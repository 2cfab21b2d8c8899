"""Cached cascade outputs: record schema, pricing, and deterministic splits.

Money is handled as an integer count of micro-dollars (1e-6 dollars).
Prices are quoted in dollars per million tokens, so the per-token price in
micro-dollars equals the quoted per-million figure and per-query costs are
exact integers after a single half-even rounding step.  Conversion back to
display dollars happens only in reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN

logger = logging.getLogger(__name__)

MICRO_PER_DOLLAR = 1_000_000


class DatasetError(ValueError):
    """A dataset file, cascade description, or record failed validation."""


def _as_decimal(value: float | int | str | Decimal, what: str) -> Decimal:
    if isinstance(value, Decimal):
        return value
    try:
        # str() of a float yields its shortest decimal form, so quoted
        # prices like 0.005 convert exactly.
        return Decimal(str(value))
    except InvalidOperation as exc:
        raise DatasetError(f"{what} is not a decimal number: {value!r}") from exc


def dollars_to_micro(amount: float | int | str | Decimal) -> int:
    """Convert a dollar amount to integer micro-dollars (half-even)."""
    dec = _as_decimal(amount, "dollar amount")
    return int((dec * MICRO_PER_DOLLAR).quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def micro_to_dollars(micro: int | float) -> float:
    """Convert micro-dollars to display dollars."""
    return micro / MICRO_PER_DOLLAR


@dataclass(frozen=True)
class ModelSpec:
    """Pricing entry for one cascade position (1-based, cheap to expensive).

    fixed_cost, when set, is a flat dollar charge per query and overrides
    token pricing entirely.
    """

    model_id: str
    position: int
    input_price_per_m: Decimal
    output_price_per_m: Decimal
    fixed_cost: Decimal | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "input_price_per_m", _as_decimal(self.input_price_per_m, "input price")
        )
        object.__setattr__(
            self, "output_price_per_m", _as_decimal(self.output_price_per_m, "output price")
        )
        if self.fixed_cost is not None:
            object.__setattr__(self, "fixed_cost", _as_decimal(self.fixed_cost, "fixed cost"))
        if not self.model_id:
            raise DatasetError("model_id must be non-empty")
        if self.position < 1:
            raise DatasetError(f"position must be >= 1, got {self.position}")
        if self.input_price_per_m < 0 or self.output_price_per_m < 0:
            raise DatasetError(f"negative price on model {self.model_id!r}")
        if self.fixed_cost is not None and self.fixed_cost < 0:
            raise DatasetError(f"negative fixed cost on model {self.model_id!r}")


@dataclass(frozen=True)
class ModelOutput:
    """Cached response of one model on one question.

    Token counts may be omitted only when the matching ModelSpec carries a
    fixed per-query cost.  confidence, when present, overrides the
    self-consistency score computed from the samples.
    """

    model_id: str
    samples: tuple[str, ...]
    input_tokens: int | None = None
    output_tokens: int | None = None
    confidence: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise DatasetError(f"model {self.model_id!r} has no samples")
        for name, tokens in (("input_tokens", self.input_tokens),
                             ("output_tokens", self.output_tokens)):
            if tokens is not None and (not isinstance(tokens, int) or tokens < 0):
                raise DatasetError(
                    f"{name} must be a non-negative integer, got {tokens!r}"
                )
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise DatasetError(
                f"confidence must lie in [0, 1], got {self.confidence!r}"
            )


@dataclass(frozen=True)
class CascadeRecord:
    """One question with the cached outputs of every cascade position."""

    question_id: str
    question: str
    outputs: tuple[ModelOutput, ...]
    ground_truth: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.question_id:
            raise DatasetError("question_id must be non-empty")
        if not self.outputs:
            raise DatasetError(f"record {self.question_id!r} has no outputs")

    @property
    def num_models(self) -> int:
        return len(self.outputs)


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint threshold-selection and calibration halves of a dataset."""

    ss: tuple[CascadeRecord, ...]
    cal: tuple[CascadeRecord, ...]
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "ss", tuple(self.ss))
        object.__setattr__(self, "cal", tuple(self.cal))
        if not self.ss or not self.cal:
            raise DatasetError("both split halves must be non-empty")


def query_cost(
    output: ModelOutput, spec: ModelSpec, output_token_cap: int | None = None
) -> int:
    """Micro-dollar cost of one cached query.

    Uses the flat fixed_cost when the spec defines one, else token-linear
    pricing.  output_token_cap truncates the billed output tokens, which
    models cutting generation short to bound heavy-tailed costs.
    """
    if spec.fixed_cost is not None:
        return dollars_to_micro(spec.fixed_cost)
    if output.input_tokens is None or output.output_tokens is None:
        raise DatasetError(
            f"model {output.model_id!r} lacks token counts and spec has no fixed cost"
        )
    out_tokens = output.output_tokens
    if output_token_cap is not None:
        out_tokens = min(out_tokens, output_token_cap)
    exact = (output.input_tokens * spec.input_price_per_m
             + out_tokens * spec.output_price_per_m)
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def load_cascade_spec(path: str) -> list[ModelSpec]:
    """Read a cascade description file (JSON with a "models" array).

    Array order defines cascade position.  Emits a warning when pricing is
    not non-decreasing along the cascade, since the search assumes later
    models cost more.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: not valid JSON: {exc}") from exc
    models = payload.get("models") if isinstance(payload, dict) else None
    if not isinstance(models, list) or len(models) < 2:
        raise DatasetError(f"{path}: expected a \"models\" array with >= 2 entries")
    specs: list[ModelSpec] = []
    seen_ids: set[str] = set()
    for idx, entry in enumerate(models):
        if not isinstance(entry, dict):
            raise DatasetError(f"{path}: models[{idx}] is not an object")
        try:
            spec = ModelSpec(
                model_id=entry["model_id"],
                position=idx + 1,
                input_price_per_m=entry.get("input_price_per_m", 0),
                output_price_per_m=entry.get("output_price_per_m", 0),
                fixed_cost=entry.get("fixed_cost"),
            )
        except KeyError as exc:
            raise DatasetError(f"{path}: models[{idx}] missing key {exc}") from exc
        if spec.model_id in seen_ids:
            raise DatasetError(f"{path}: duplicate model_id {spec.model_id!r}")
        seen_ids.add(spec.model_id)
        specs.append(spec)
    for prev, cur in zip(specs, specs[1:]):
        decreasing = (
            cur.input_price_per_m < prev.input_price_per_m
            or cur.output_price_per_m < prev.output_price_per_m
            or (prev.fixed_cost is not None and cur.fixed_cost is not None
                and cur.fixed_cost < prev.fixed_cost)
        )
        if decreasing:
            logger.warning(
                "cascade pricing decreases from %r to %r; positions are "
                "assumed ordered cheap to expensive",
                prev.model_id, cur.model_id,
            )
    return specs


def save_cascade_spec(specs: list[ModelSpec], path: str) -> None:
    models = []
    for spec in specs:
        models.append({
            "model_id": spec.model_id,
            "input_price_per_m": float(spec.input_price_per_m),
            "output_price_per_m": float(spec.output_price_per_m),
            "fixed_cost": None if spec.fixed_cost is None else float(spec.fixed_cost),
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"models": models}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_output(raw: dict, line_no: int) -> ModelOutput:
    try:
        return ModelOutput(
            model_id=raw["model_id"],
            samples=tuple(raw["samples"]),
            input_tokens=raw.get("input_tokens"),
            output_tokens=raw.get("output_tokens"),
            confidence=raw.get("confidence"),
        )
    except KeyError as exc:
        raise DatasetError(f"line {line_no}: output missing key {exc}") from exc
    except DatasetError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from exc


def load_dataset(path: str, specs: list[ModelSpec] | None = None) -> list[CascadeRecord]:
    """Read a JSONL dataset of cached cascade outputs.

    Every record must carry one output per cascade position, in position
    order.  When specs are supplied, output model ids must match the
    cascade and token counts may be omitted only at fixed-cost positions.
    """
    records: list[CascadeRecord] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: not valid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise DatasetError(f"line {line_no}: record is not an object")
            try:
                outputs = tuple(_parse_output(o, line_no) for o in raw["outputs"])
                record = CascadeRecord(
                    question_id=raw["question_id"],
                    question=raw.get("question", ""),
                    outputs=outputs,
                    ground_truth=raw.get("ground_truth"),
                )
            except KeyError as exc:
                raise DatasetError(f"line {line_no}: record missing key {exc}") from exc
            except DatasetError as exc:
                raise DatasetError(f"line {line_no}: {exc}") from exc
            if record.question_id in seen_ids:
                raise DatasetError(
                    f"line {line_no}: duplicate question_id {record.question_id!r}"
                )
            seen_ids.add(record.question_id)
            records.append(record)
    if not records:
        raise DatasetError(f"{path}: dataset is empty")
    expected = len(specs) if specs is not None else records[0].num_models
    for record in records:
        if record.num_models != expected:
            raise DatasetError(
                f"record {record.question_id!r} has {record.num_models} outputs, "
                f"expected {expected}"
            )
        if specs is not None:
            for out, spec in zip(record.outputs, specs):
                if out.model_id != spec.model_id:
                    raise DatasetError(
                        f"record {record.question_id!r}: output {out.model_id!r} at "
                        f"position {spec.position} does not match cascade "
                        f"model {spec.model_id!r}"
                    )
                if spec.fixed_cost is None and (
                    out.input_tokens is None or out.output_tokens is None
                ):
                    raise DatasetError(
                        f"record {record.question_id!r}: model {out.model_id!r} "
                        "lacks token counts and the cascade has no fixed cost "
                        "for that position"
                    )
    return records


def save_dataset(records: list[CascadeRecord], path: str) -> None:
    """Write records as JSONL in the same schema load_dataset reads."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            payload = {
                "question_id": record.question_id,
                "question": record.question,
                "ground_truth": record.ground_truth,
                "outputs": [
                    {
                        "model_id": out.model_id,
                        "samples": list(out.samples),
                        "input_tokens": out.input_tokens,
                        "output_tokens": out.output_tokens,
                        "confidence": out.confidence,
                    }
                    for out in record.outputs
                ],
            }
            fh.write(json.dumps(payload, sort_keys=True))
            fh.write("\n")


def split_dataset(
    records: list[CascadeRecord], ss_fraction: float = 0.5, seed: int = 0
) -> DatasetSplit:
    """Deterministically split records into selection and calibration halves.

    The selection half gets round(ss_fraction * N) records (half-even
    rounding), clamped so both halves stay non-empty.  Membership depends
    on the seed; the sizes never do.
    """
    n = len(records)
    if n < 2:
        raise DatasetError(f"need at least 2 records to split, got {n}")
    if not 0.0 <= ss_fraction <= 1.0:
        raise DatasetError(f"ss_fraction must lie in [0, 1], got {ss_fraction}")
    n_ss = max(1, min(n - 1, round(ss_fraction * n)))
    order = list(range(n))
    random.Random(seed).shuffle(order)
    ss_idx = sorted(order[:n_ss])
    cal_idx = sorted(order[n_ss:])
    return DatasetSplit(
        ss=tuple(records[i] for i in ss_idx),
        cal=tuple(records[i] for i in cal_idx),
        seed=seed,
    )


def dataset_sha256(path: str) -> str:
    """Hex digest of a file's bytes, recorded in policy provenance."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
