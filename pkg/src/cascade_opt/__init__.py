"""Budget-certified early-exit threshold policies for model cascades.

Learns per-position confidence thresholds for a cascade of increasingly
capable (and expensive) models from cached, unlabeled outputs, and
certifies a probabilistic per-query cost budget by split conformal
calibration.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundInputs,
    bound_report,
    excess_regret_bound,
    generalization_epsilon,
    mdc,
    mdc_cap,
    normal_quantile,
    recommended_grid_resolution,
)
from .cascade import (
    CascadeOutcome,
    ScoredRecord,
    ThresholdVector,
    empirical_regret,
    evaluate_record,
    exit_index,
    outcomes,
    score_records,
)
from .conformal import (
    CertificationReport,
    audit_violation_rate,
    certify,
    certify_stochastic,
    realized_costs,
    with_audit,
)
from .evaluation import (
    EvalReport,
    Policy,
    SweepRow,
    evaluate_policy,
    execute_record,
    policy_from_result,
    replay_backend,
    sweep_budgets,
    write_sweep_csv,
)
from .optimizer import (
    GridSpec,
    OptimizationResult,
    build_grid,
    cost_quantile_index,
    optimize,
    oracle_optimize,
)
from .records import (
    CascadeRecord,
    DatasetError,
    DatasetSplit,
    ModelOutput,
    ModelSpec,
    dataset_sha256,
    dollars_to_micro,
    load_cascade_spec,
    load_dataset,
    micro_to_dollars,
    query_cost,
    save_cascade_spec,
    save_dataset,
    split_dataset,
)
from .scoring import ScoredOutput, canonicalize, regret_loss, score_output
from .simulator import (
    SimConfig,
    TrialResult,
    TrialSummary,
    default_model_specs,
    default_skill,
    generate,
    run_single_trial,
    run_trials,
)

__all__ = [
    "__version__",
    "BoundInputs",
    "CascadeOutcome",
    "CascadeRecord",
    "CertificationReport",
    "DatasetError",
    "DatasetSplit",
    "EvalReport",
    "GridSpec",
    "ModelOutput",
    "ModelSpec",
    "OptimizationResult",
    "Policy",
    "ScoredOutput",
    "ScoredRecord",
    "SimConfig",
    "SweepRow",
    "ThresholdVector",
    "TrialResult",
    "TrialSummary",
    "audit_violation_rate",
    "bound_report",
    "build_grid",
    "canonicalize",
    "certify",
    "certify_stochastic",
    "cost_quantile_index",
    "dataset_sha256",
    "default_model_specs",
    "default_skill",
    "dollars_to_micro",
    "empirical_regret",
    "evaluate_policy",
    "evaluate_record",
    "excess_regret_bound",
    "execute_record",
    "exit_index",
    "generalization_epsilon",
    "generate",
    "load_cascade_spec",
    "load_dataset",
    "mdc",
    "mdc_cap",
    "micro_to_dollars",
    "normal_quantile",
    "optimize",
    "oracle_optimize",
    "outcomes",
    "policy_from_result",
    "query_cost",
    "realized_costs",
    "recommended_grid_resolution",
    "regret_loss",
    "replay_backend",
    "run_single_trial",
    "run_trials",
    "save_cascade_spec",
    "save_dataset",
    "score_output",
    "score_records",
    "split_dataset",
    "sweep_budgets",
    "with_audit",
    "write_sweep_csv",
]
