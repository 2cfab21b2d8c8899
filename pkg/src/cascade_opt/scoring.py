"""Answer canonicalization, self-consistency confidence, and 0-1 regret.

Confidence is the modal share of canonicalized samples: the fraction of
samples agreeing with the most common answer.  Canonicalization is string
normalization only; it never evaluates arithmetic or matches semantics, so
distinct answers stay distinct.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .records import ModelOutput

_BOX_RE = re.compile(r"\\(?:boxed|fbox)\s*\{(.*)\}\Z", re.DOTALL)
_NUMERIC_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)\Z")
_WS_RE = re.compile(r"\s+")
_TRAILING_PUNCT = ".,;:!?"


def _unwrap(text: str) -> str:
    # Peel surrounding math-mode dollars and box commands, repeatedly,
    # so "$\boxed{40}$" reduces to "40".
    while True:
        stripped = text.strip()
        if len(stripped) >= 2 and stripped[0] == "$" and stripped[-1] == "$":
            text = stripped[1:-1]
            continue
        match = _BOX_RE.match(stripped)
        if match:
            text = match.group(1)
            continue
        return stripped


def _canonical_number(text: str) -> str:
    try:
        value = Decimal(text)
    except InvalidOperation:
        return text
    if value == 0:
        return "0"
    # format(..., "f") avoids the exponent form Decimal.normalize() can
    # produce for integers ending in zeros.
    return format(value.normalize(), "f")


def canonicalize(raw: str) -> str:
    """Normalize an answer string to its canonical comparison form.

    Trims, unwraps LaTeX box markers, lowercases, collapses internal
    whitespace, drops trailing punctuation, and rewrites plain decimal
    numbers in canonical form ("3.50" and "3.5" agree, "40" stays "40").
    """
    text = _unwrap(raw)
    text = text.lower()
    text = _WS_RE.sub(" ", text).strip()
    text = text.rstrip(_TRAILING_PUNCT).strip()
    if _NUMERIC_RE.match(text):
        text = _canonical_number(text)
    return text


@dataclass(frozen=True)
class ScoredOutput:
    """Majority answer and confidence of one model on one question."""

    answer: str
    confidence: float
    modal_count: int
    sample_count: int


def score_output(output: ModelOutput, position: int, num_models: int) -> ScoredOutput:
    """Score one cached output by self-consistency.

    The answer is the modal canonical form (ties broken by lexicographically
    smallest form).  Confidence is modal share, unless the record carries a
    precomputed confidence.  The final cascade position always reports
    confidence 1 so the cascade is guaranteed to exit there.
    """
    if not 1 <= position <= num_models:
        raise ValueError(f"position {position} outside 1..{num_models}")
    counts = Counter(canonicalize(s) for s in output.samples)
    modal_count = max(counts.values())
    answer = min(form for form, c in counts.items() if c == modal_count)
    if position == num_models:
        confidence = 1.0
    elif output.confidence is not None:
        confidence = output.confidence
    else:
        confidence = modal_count / len(output.samples)
    return ScoredOutput(
        answer=answer,
        confidence=confidence,
        modal_count=modal_count,
        sample_count=len(output.samples),
    )


def regret_loss(answer: str, reference: str) -> int:
    """0-1 disagreement between two canonical answers."""
    return 0 if answer == reference else 1
