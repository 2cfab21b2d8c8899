"""Synthetic cascade generator and end-to-end Monte-Carlo trials.

Records are drawn i.i.d., hence exchangeable: a latent difficulty is
uniform on (0, 1), the true answer is uniform over a finite answer space,
and each model's samples are correct with probability
sigmoid(skill_j - slope * difficulty), otherwise a uniform distractor.
Stronger models (larger skill) are right more often, so the modal-share
confidence is informative about agreement with the strongest model by
construction.  Confidences are left unset and flow through the scoring
path.  Output tokens per sample are lognormal with an optional cap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np

from .bounds import generalization_epsilon
from .cascade import ThresholdVector, outcomes, score_records
from .conformal import certify_stochastic
from .optimizer import GridSpec, OptimizationResult, optimize
from .records import CascadeRecord, DatasetSplit, ModelOutput, ModelSpec

logger = logging.getLogger(__name__)


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class SimConfig:
    """Generator settings.

    skill holds one logistic intercept per cascade position, strictly
    increasing.  token_mean is the median output tokens per sample;
    token_sigma the lognormal shape; token_cap truncates each sample's
    tokens at generation time.  input_tokens is the fixed prompt size
    billed on every model query.
    """

    num_models: int
    n_records: int
    skill: tuple[float, ...]
    difficulty_slope: float = 4.0
    n_samples_per_model: int = 5
    answer_space: int = 10
    token_mean: float = 200.0
    token_sigma: float = 0.5
    input_tokens: int = 500
    token_cap: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "skill", tuple(float(a) for a in self.skill))
        if self.num_models < 2:
            raise ValueError(f"cascade needs >= 2 models, got {self.num_models}")
        if len(self.skill) != self.num_models:
            raise ValueError(
                f"skill has {len(self.skill)} entries for {self.num_models} models"
            )
        if any(b <= a for a, b in zip(self.skill, self.skill[1:])):
            raise ValueError(f"skill must be strictly increasing, got {self.skill}")
        if self.difficulty_slope <= 0.0:
            raise ValueError(f"difficulty_slope must be > 0, got {self.difficulty_slope}")
        if self.n_records < 1:
            raise ValueError(f"n_records must be >= 1, got {self.n_records}")
        if self.n_samples_per_model < 1:
            raise ValueError(f"need >= 1 sample per model, got {self.n_samples_per_model}")
        if self.answer_space < 2:
            raise ValueError(f"answer_space must be >= 2, got {self.answer_space}")
        if self.token_mean <= 0.0 or self.token_sigma < 0.0:
            raise ValueError("token_mean must be > 0 and token_sigma >= 0")
        if self.input_tokens < 0:
            raise ValueError(f"input_tokens must be >= 0, got {self.input_tokens}")
        if self.token_cap is not None and self.token_cap < 1:
            raise ValueError(f"token_cap must be >= 1, got {self.token_cap}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def default_skill(num_models: int) -> tuple[float, ...]:
    """Evenly spaced intercepts from weak (-1) to strong (3)."""
    if num_models < 2:
        raise ValueError(f"cascade needs >= 2 models, got {num_models}")
    step = 4.0 / (num_models - 1)
    return tuple(-1.0 + step * j for j in range(num_models))


def default_model_specs(
    num_models: int,
    fixed_costs: Sequence[float] | None = None,
    base_input_price: float = 0.01,
    base_output_price: float = 0.03,
    price_factor: float = 8.0,
) -> list[ModelSpec]:
    """Synthetic pricing ladder: each position a constant factor dearer.

    fixed_costs (dollars per query, one per position) switches every
    position to flat pricing instead.
    """
    if fixed_costs is not None:
        if len(fixed_costs) != num_models:
            raise ValueError(
                f"{len(fixed_costs)} fixed costs for {num_models} models"
            )
        return [
            ModelSpec(
                model_id=f"sim-model-{j + 1}",
                position=j + 1,
                input_price_per_m=0,
                output_price_per_m=0,
                fixed_cost=cost,
            )
            for j, cost in enumerate(fixed_costs)
        ]
    return [
        ModelSpec(
            model_id=f"sim-model-{j + 1}",
            position=j + 1,
            input_price_per_m=round(base_input_price * price_factor ** j, 9),
            output_price_per_m=round(base_output_price * price_factor ** j, 9),
        )
        for j in range(num_models)
    ]


def generate(config: SimConfig) -> list[CascadeRecord]:
    """Draw a fresh i.i.d. dataset; the same config yields identical records.

    The per-record draw order is fixed (difficulty, truth, then per model:
    correctness, distractors, tokens), so outputs are reproducible
    regardless of their values.
    """
    rng = np.random.default_rng(config.seed)
    V = config.answer_space
    n_samp = config.n_samples_per_model
    records: list[CascadeRecord] = []
    for i in range(config.n_records):
        difficulty = rng.uniform()
        truth = int(rng.integers(V))
        outputs: list[ModelOutput] = []
        for j, skill in enumerate(config.skill):
            p_correct = _sigmoid(skill - config.difficulty_slope * difficulty)
            correct = rng.random(n_samp) < p_correct
            distractors = rng.integers(V - 1, size=n_samp)
            tokens = rng.lognormal(
                mean=math.log(config.token_mean),
                sigma=config.token_sigma,
                size=n_samp,
            )
            samples: list[str] = []
            for s in range(n_samp):
                if correct[s]:
                    samples.append(str(truth))
                else:
                    d = int(distractors[s])
                    if d >= truth:
                        d += 1
                    samples.append(str(d))
            per_sample = np.maximum(1, np.rint(tokens)).astype(np.int64)
            if config.token_cap is not None:
                per_sample = np.minimum(per_sample, config.token_cap)
            outputs.append(
                ModelOutput(
                    model_id=f"sim-model-{j + 1}",
                    samples=tuple(samples),
                    input_tokens=config.input_tokens,
                    output_tokens=int(per_sample.sum()),
                )
            )
        records.append(
            CascadeRecord(
                question_id=f"sim-{config.seed}-{i:06d}",
                question=f"synthetic question {i}",
                outputs=tuple(outputs),
                ground_truth=str(truth),
            )
        )
    return records


@dataclass(frozen=True)
class TrialResult:
    """One end-to-end run: generate, search, certify, evaluate."""

    index: int
    seed: int
    feasible: bool
    certified: bool
    taus: tuple[float, ...]
    train_regret: float
    test_regret: float
    violations: int
    n_test: int
    violation_rate: float
    mean_test_cost: float
    cal_cost_quantile: int | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "trial": self.index,
            "seed": self.seed,
            "feasible": self.feasible,
            "certified": self.certified,
            "taus": "|".join(repr(t) for t in self.taus),
            "train_regret": None if math.isinf(self.train_regret) else self.train_regret,
            "test_regret": self.test_regret,
            "violations": self.violations,
            "n_test": self.n_test,
            "violation_rate": self.violation_rate,
            "mean_test_cost_micro": self.mean_test_cost,
            "cal_cost_quantile_micro": self.cal_cost_quantile,
        }


@dataclass(frozen=True)
class TrialSummary:
    """Pooled coverage and regret-gap statistics across trials."""

    n_trials: int
    certified_trials: int
    pooled_violations: int
    pooled_test_count: int
    pooled_violation_rate: float | None
    alpha: float
    budget: int
    delta: float
    epsilon: float
    gap_within_epsilon_fraction: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_trials": self.n_trials,
            "certified_trials": self.certified_trials,
            "pooled_violations": self.pooled_violations,
            "pooled_test_count": self.pooled_test_count,
            "pooled_violation_rate": self.pooled_violation_rate,
            "alpha": self.alpha,
            "budget_micro": self.budget,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "gap_within_epsilon_fraction": self.gap_within_epsilon_fraction,
        }


def _trial_seed(seed: int, index: int) -> int:
    state = np.random.SeedSequence([seed, index]).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def run_single_trial(
    config: SimConfig,
    specs: Sequence[ModelSpec],
    grid: GridSpec,
    budget: int,
    alpha: float,
    index: int,
    seed: int,
    n_ss: int,
    n_cal: int,
    n_test: int,
    jobs: int = 1,
) -> TrialResult:
    """Generate fresh data, search, certify, and evaluate once."""
    trial_seed = _trial_seed(seed, index)
    cfg = replace(config, seed=trial_seed, n_records=n_ss + n_cal + n_test)
    records = generate(cfg)
    split = DatasetSplit(
        ss=tuple(records[:n_ss]),
        cal=tuple(records[n_ss:n_ss + n_cal]),
        seed=trial_seed,
    )
    test = records[n_ss + n_cal:]
    result: OptimizationResult = optimize(split, grid, budget, alpha, specs, jobs=jobs)
    report = certify_stochastic(split.cal, result.best_tau, budget, alpha, specs)
    test_outcomes = outcomes(score_records(test, specs), result.best_tau)
    violations = sum(1 for o in test_outcomes if o.cost > budget)
    return TrialResult(
        index=index,
        seed=trial_seed,
        feasible=result.feasible,
        certified=report.certified,
        taus=result.best_tau.taus,
        train_regret=result.best_regret,
        test_regret=sum(o.regret_vs_mpm for o in test_outcomes) / n_test,
        violations=violations,
        n_test=n_test,
        violation_rate=violations / n_test,
        mean_test_cost=sum(o.cost for o in test_outcomes) / n_test,
        cal_cost_quantile=result.cal_cost_quantile,
    )


def run_trials(
    config: SimConfig,
    specs: Sequence[ModelSpec],
    grid: GridSpec,
    budget: int,
    alpha: float,
    n_trials: int,
    seed: int,
    n_ss: int = 150,
    n_cal: int = 50,
    n_test: int = 200,
    delta: float = 0.05,
    jobs: int = 1,
) -> tuple[list[TrialResult], TrialSummary]:
    """Repeated end-to-end trials on fresh synthetic data.

    Each trial derives an independent stream from (seed, trial index), so
    any prefix of trials is reproducible in isolation.  Violations are
    pooled over certified trials only; uncertified trials claim no
    guarantee.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if min(n_ss, n_cal, n_test) < 1:
        raise ValueError("n_ss, n_cal, and n_test must all be >= 1")
    trials = [
        run_single_trial(
            config, specs, grid, budget, alpha, t, seed, n_ss, n_cal, n_test,
            jobs=jobs,
        )
        for t in range(n_trials)
    ]
    certified = [t for t in trials if t.certified]
    pooled_violations = sum(t.violations for t in certified)
    pooled_count = sum(t.n_test for t in certified)
    epsilon = generalization_epsilon(
        config.num_models, grid.grid_resolution, n_ss, delta
    )
    gaps_in = [
        abs(t.test_regret - t.train_regret) <= epsilon
        for t in trials
        if not math.isinf(t.train_regret)
    ]
    summary = TrialSummary(
        n_trials=n_trials,
        certified_trials=len(certified),
        pooled_violations=pooled_violations,
        pooled_test_count=pooled_count,
        pooled_violation_rate=(
            pooled_violations / pooled_count if pooled_count else None
        ),
        alpha=alpha,
        budget=budget,
        delta=delta,
        epsilon=epsilon,
        gap_within_epsilon_fraction=(
            sum(gaps_in) / len(gaps_in) if gaps_in else None
        ),
    )
    logger.info(
        "trials done: %d/%d certified, pooled violation rate %s at alpha %s",
        len(certified), n_trials, summary.pooled_violation_rate, alpha,
    )
    return trials, summary
