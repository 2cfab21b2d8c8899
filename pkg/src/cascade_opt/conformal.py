"""Split conformal certification of a per-query cost budget.

With calibration costs C_1..C_n exchangeable with a test cost, the rank
argument gives Pr(C_test > C_(k)) <= alpha for k = ceil((n + 1) * (1 -
alpha)).  A budget is certified when at least k calibration costs fall at
or below it; costs tied with the budget count as within it.  The same rank
logic applies unchanged when per-record costs are themselves random
(token-priced exits), since only exchangeability of the realized costs is
used.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Sequence

from .cascade import ThresholdVector, evaluate_record
from .optimizer import cost_quantile_index
from .records import CascadeRecord, ModelSpec


@dataclass(frozen=True)
class CertificationReport:
    """Whether a budget is certified at miscoverage level alpha.

    budget_rank counts calibration costs <= budget; certification requires
    budget_rank >= required_rank.  empirical_test_violation_rate is filled
    only when a held-out audit set is supplied.
    """

    n_cal: int
    alpha: float
    budget: int
    budget_rank: int
    required_rank: int
    certified: bool
    empirical_test_violation_rate: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_cal": self.n_cal,
            "alpha": self.alpha,
            "budget_micro": self.budget,
            "budget_rank": self.budget_rank,
            "required_rank": self.required_rank,
            "certified": self.certified,
            "empirical_test_violation_rate": self.empirical_test_violation_rate,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "CertificationReport":
        return cls(
            n_cal=payload["n_cal"],
            alpha=payload["alpha"],
            budget=payload["budget_micro"],
            budget_rank=payload["budget_rank"],
            required_rank=payload["required_rank"],
            certified=payload["certified"],
            empirical_test_violation_rate=payload.get("empirical_test_violation_rate"),
        )


def certify(cal_costs: Sequence[int], budget: int, alpha: float) -> CertificationReport:
    """Check the conformal rank condition on realized calibration costs."""
    if not cal_costs:
        raise ValueError("cannot certify with zero calibration costs")
    if any(c < 0 for c in cal_costs):
        raise ValueError("calibration costs must be >= 0 micro-dollars")
    if budget < 0:
        raise ValueError(f"budget must be >= 0 micro-dollars, got {budget}")
    required = cost_quantile_index(len(cal_costs), alpha)
    rank = sum(1 for c in cal_costs if c <= budget)
    return CertificationReport(
        n_cal=len(cal_costs),
        alpha=alpha,
        budget=budget,
        budget_rank=rank,
        required_rank=required,
        certified=rank >= required,
    )


def audit_violation_rate(test_costs: Sequence[int], budget: int) -> float:
    """Fraction of held-out costs strictly above the budget."""
    if not test_costs:
        raise ValueError("cannot audit with zero test costs")
    return sum(1 for c in test_costs if c > budget) / len(test_costs)


def with_audit(
    report: CertificationReport, test_costs: Sequence[int]
) -> CertificationReport:
    """Attach a held-out violation rate to an existing report."""
    return replace(
        report,
        empirical_test_violation_rate=audit_violation_rate(test_costs, report.budget),
    )


def realized_costs(
    records: Sequence[CascadeRecord],
    taus: ThresholdVector,
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> list[int]:
    """Per-record cascade costs under a fixed threshold vector.

    output_token_cap truncates billed output tokens first, the device that
    restores a finite certificate under heavy-tailed generation lengths.
    """
    return [
        evaluate_record(r, taus, specs, output_token_cap=output_token_cap).cost
        for r in records
    ]


def certify_stochastic(
    cal_records: Sequence[CascadeRecord],
    taus: ThresholdVector,
    budget: int,
    alpha: float,
    specs: Sequence[ModelSpec],
    output_token_cap: int | None = None,
) -> CertificationReport:
    """Certify a budget from calibration records under a fixed policy.

    Evaluates each record's realized cost (random exit position and token
    counts included) and applies the same rank condition as certify.
    """
    costs = realized_costs(cal_records, taus, specs, output_token_cap=output_token_cap)
    return certify(costs, budget, alpha)
