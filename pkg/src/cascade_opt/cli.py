"""Command-line interface.

Subcommands: optimize, certify, evaluate, sweep, simulate, bounds, exec.
All randomness flows from --seed; --jobs never changes results.  Report
subcommands render a PNG next to their CSV/JSON output.  The log level
comes from the CASCADE_OPT_LOG environment variable.

Exit codes: 0 success, 2 validation failure, 3 infeasible or uncertified
budget, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import __version__
from .bounds import BoundInputs, bound_report
from .conformal import certify_stochastic, realized_costs, with_audit
from .evaluation import (
    Policy,
    evaluate_policy,
    execute_record,
    policy_from_result,
    sweep_budgets,
    write_sweep_csv,
)
from .optimizer import GridSpec, optimize
from .records import (
    DatasetError,
    dataset_sha256,
    dollars_to_micro,
    load_cascade_spec,
    load_dataset,
    micro_to_dollars,
    save_cascade_spec,
    save_dataset,
    split_dataset,
)
from .simulator import (
    SimConfig,
    default_model_specs,
    default_skill,
    generate,
    run_trials,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _configure_logging() -> None:
    level_name = os.environ.get("CASCADE_OPT_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from exc


def _ensure_out(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_optimize(args: argparse.Namespace) -> int:
    specs = load_cascade_spec(args.cascade)
    records = load_dataset(args.dataset, specs)
    split = split_dataset(records, ss_fraction=args.ss_fraction, seed=args.seed)
    grid = GridSpec(grid_resolution=args.k, num_models=len(specs))
    budget = dollars_to_micro(args.budget)
    result = optimize(split, grid, budget, args.alpha, specs, jobs=args.jobs)
    report = certify_stochastic(split.cal, result.best_tau, budget, args.alpha, specs)
    policy = policy_from_result(
        result,
        alpha=args.alpha,
        budget=budget,
        certification=report,
        provenance={
            "dataset_sha256": dataset_sha256(args.dataset),
            "cascade_sha256": dataset_sha256(args.cascade),
            "seed": args.seed,
            "ss_fraction": args.ss_fraction,
            "tool_version": __version__,
        },
    )
    out = _ensure_out(args.out)
    policy.save(os.path.join(out, "policy.json"))
    print(
        f"feasible={result.feasible} certified={report.certified} "
        f"taus={list(result.best_tau.taus)} "
        f"regret={'inf' if not result.feasible else result.best_regret} "
        f"accepted={result.accepted_count}/{result.candidates_evaluated}"
    )
    if not result.feasible:
        logger.warning(
            "no threshold vector fits budget %s at alpha %s",
            micro_to_dollars(budget), args.alpha,
        )
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    policy = Policy.load(args.policy)
    specs = load_cascade_spec(args.cascade)
    cal = load_dataset(args.dataset, specs)
    budget = policy.budget if args.budget is None else dollars_to_micro(args.budget)
    alpha = policy.alpha if args.alpha is None else args.alpha
    report = certify_stochastic(
        cal, policy.taus, budget, alpha, specs, output_token_cap=args.token_cap
    )
    if args.test_dataset:
        test = load_dataset(args.test_dataset, specs)
        report = with_audit(
            report,
            realized_costs(test, policy.taus, specs, output_token_cap=args.token_cap),
        )
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.out:
        out = _ensure_out(args.out)
        _write_json(report.to_dict(), os.path.join(out, "certification.json"))
    return EXIT_OK if report.certified else EXIT_INFEASIBLE


def cmd_evaluate(args: argparse.Namespace) -> int:
    policy = Policy.load(args.policy)
    specs = load_cascade_spec(args.cascade)
    records = load_dataset(args.dataset, specs)
    report = evaluate_policy(policy, records, specs, output_token_cap=args.token_cap)
    out = _ensure_out(args.out)
    _write_json(report.to_dict(), os.path.join(out, "evaluation.json"))
    from .plots import save_evaluation_figure

    save_evaluation_figure(report, os.path.join(out, "evaluation.png"))
    print(
        f"n_test={report.n_test} regret_vs_mpm={report.regret_vs_mpm} "
        f"mean_cost={micro_to_dollars(report.mean_cost)} "
        f"violation_rate={report.violation_rate}"
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    specs = load_cascade_spec(args.cascade)
    records = load_dataset(args.dataset, specs)
    test_records = load_dataset(args.test_dataset, specs)
    split = split_dataset(records, ss_fraction=args.ss_fraction, seed=args.seed)
    grid = GridSpec(grid_resolution=args.k, num_models=len(specs))
    budgets = [dollars_to_micro(b) for b in args.budgets]
    rows = sweep_budgets(
        split, grid, budgets, args.alpha, specs, test_records, jobs=args.jobs
    )
    out = _ensure_out(args.out)
    write_sweep_csv(rows, os.path.join(out, "sweep.csv"))
    _write_json({"rows": [r.to_dict() for r in rows]}, os.path.join(out, "sweep.json"))
    from .plots import save_sweep_figure

    save_sweep_figure(rows, os.path.join(out, "sweep.png"))
    print(f"wrote {len(rows)} sweep rows to {out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    skill = tuple(args.skill) if args.skill else default_skill(args.models)
    config = SimConfig(
        num_models=args.models,
        n_records=args.records,
        skill=skill,
        difficulty_slope=args.difficulty_slope,
        n_samples_per_model=args.samples,
        answer_space=args.answer_space,
        token_mean=args.token_mean,
        token_sigma=args.token_sigma,
        input_tokens=args.input_tokens,
        token_cap=args.token_cap,
        seed=args.seed,
    )
    specs = default_model_specs(args.models, fixed_costs=args.fixed_costs)
    out = _ensure_out(args.out)
    if args.trials:
        if args.budget is None:
            raise DatasetError("--budget is required with --trials")
        grid = GridSpec(grid_resolution=args.k, num_models=args.models)
        trials, summary = run_trials(
            config,
            specs,
            grid,
            dollars_to_micro(args.budget),
            args.alpha,
            args.trials,
            args.seed,
            n_ss=args.n_ss,
            n_cal=args.n_cal,
            n_test=args.n_test,
            delta=args.delta,
            jobs=args.jobs,
        )
        rows = [t.to_dict() for t in trials]
        with open(os.path.join(out, "trials.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        _write_json(
            {"summary": summary.to_dict(), "trials": rows},
            os.path.join(out, "trials.json"),
        )
        from .plots import save_trials_figure

        save_trials_figure(trials, summary, os.path.join(out, "trials.png"))
        print(
            f"trials={summary.n_trials} certified={summary.certified_trials} "
            f"pooled_violation_rate={summary.pooled_violation_rate} "
            f"alpha={summary.alpha}"
        )
    else:
        records = generate(config)
        save_dataset(records, os.path.join(out, "dataset.jsonl"))
        save_cascade_spec(specs, os.path.join(out, "cascade.json"))
        print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    inputs = BoundInputs(
        num_models=args.models,
        grid_resolution=args.k,
        n_ss=args.n_ss,
        delta=args.delta,
        alpha=args.alpha,
    )
    payload = bound_report(inputs)
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        out = _ensure_out(args.out)
        _write_json(payload, os.path.join(out, "bounds.json"))
    return EXIT_OK


def cmd_exec(args: argparse.Namespace) -> int:
    policy = Policy.load(args.policy)
    specs = load_cascade_spec(args.cascade)
    records = load_dataset(args.dataset, specs)
    lines = []
    for record in records:
        outcome = execute_record(
            record, policy.taus, specs, output_token_cap=args.token_cap
        )
        lines.append(json.dumps({
            "question_id": record.question_id,
            "exit_position": outcome.exit_position,
            "answer": outcome.answer,
            "cost_micro": outcome.cost,
            "cost_dollars": micro_to_dollars(outcome.cost),
            "regret_vs_mpm": outcome.regret_vs_mpm,
        }, sort_keys=True))
    if args.out:
        out = _ensure_out(args.out)
        with open(os.path.join(out, "outcomes.jsonl"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
    else:
        for line in lines:
            print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-opt",
        description="Budget-certified early-exit policies for model cascades",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="search thresholds under a budget")
    p_opt.add_argument("--dataset", required=True)
    p_opt.add_argument("--cascade", required=True)
    p_opt.add_argument("--budget", type=float, required=True, help="dollars per query")
    p_opt.add_argument("--k", type=int, default=10, help="grid resolution")
    p_opt.add_argument("--alpha", type=float, default=0.05)
    p_opt.add_argument("--ss-fraction", type=float, default=0.5)
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--jobs", type=int, default=1)
    p_opt.add_argument("--out", required=True)
    p_opt.set_defaults(func=cmd_optimize)

    p_cert = sub.add_parser("certify", help="certify a budget for a policy")
    p_cert.add_argument("--dataset", required=True, help="calibration records")
    p_cert.add_argument("--cascade", required=True)
    p_cert.add_argument("--policy", required=True)
    p_cert.add_argument("--budget", type=float, default=None,
                        help="dollars per query (default: policy budget)")
    p_cert.add_argument("--alpha", type=float, default=None,
                        help="default: policy alpha")
    p_cert.add_argument("--test-dataset", default=None,
                        help="held-out records for an empirical audit")
    p_cert.add_argument("--token-cap", type=int, default=None)
    p_cert.add_argument("--out", default=None)
    p_cert.set_defaults(func=cmd_certify)

    p_eval = sub.add_parser("evaluate", help="measure a policy on held-out records")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--cascade", required=True)
    p_eval.add_argument("--policy", required=True)
    p_eval.add_argument("--token-cap", type=int, default=None)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="trace the cost-regret frontier")
    p_sweep.add_argument("--dataset", required=True)
    p_sweep.add_argument("--test-dataset", required=True)
    p_sweep.add_argument("--cascade", required=True)
    p_sweep.add_argument("--budgets", type=_float_list, required=True,
                         help="comma-separated ascending dollars")
    p_sweep.add_argument("--k", type=int, default=10)
    p_sweep.add_argument("--alpha", type=float, default=0.05)
    p_sweep.add_argument("--ss-fraction", type=float, default=0.5)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="generate synthetic data or run trials")
    p_sim.add_argument("--models", type=int, default=3)
    p_sim.add_argument("--records", type=int, default=200)
    p_sim.add_argument("--skill", type=_float_list, default=None)
    p_sim.add_argument("--difficulty-slope", type=float, default=4.0)
    p_sim.add_argument("--samples", type=int, default=5)
    p_sim.add_argument("--answer-space", type=int, default=10)
    p_sim.add_argument("--token-mean", type=float, default=200.0)
    p_sim.add_argument("--token-sigma", type=float, default=0.5)
    p_sim.add_argument("--input-tokens", type=int, default=500)
    p_sim.add_argument("--token-cap", type=int, default=None)
    p_sim.add_argument("--fixed-costs", type=_float_list, default=None,
                       help="flat dollars per query, one per model")
    p_sim.add_argument("--trials", type=int, default=0,
                       help="run end-to-end trials instead of emitting a dataset")
    p_sim.add_argument("--budget", type=float, default=None)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--delta", type=float, default=0.05)
    p_sim.add_argument("--k", type=int, default=10)
    p_sim.add_argument("--n-ss", type=int, default=150)
    p_sim.add_argument("--n-cal", type=int, default=50)
    p_sim.add_argument("--n-test", type=int, default=200)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--jobs", type=int, default=1)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_bounds = sub.add_parser("bounds", help="print planning bounds")
    p_bounds.add_argument("--models", type=int, required=True)
    p_bounds.add_argument("--k", type=int, required=True)
    p_bounds.add_argument("--n-ss", type=int, required=True)
    p_bounds.add_argument("--delta", type=float, default=0.05)
    p_bounds.add_argument("--alpha", type=float, default=0.05)
    p_bounds.add_argument("--out", default=None)
    p_bounds.set_defaults(func=cmd_bounds)

    p_exec = sub.add_parser("exec", help="replay a policy record by record")
    p_exec.add_argument("--dataset", required=True)
    p_exec.add_argument("--cascade", required=True)
    p_exec.add_argument("--policy", required=True)
    p_exec.add_argument("--token-cap", type=int, default=None)
    p_exec.add_argument("--out", default=None)
    p_exec.set_defaults(func=cmd_exec)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DatasetError as exc:
        logger.error("invalid input: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        logger.error("invalid argument: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        logger.error("i/o failure: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
