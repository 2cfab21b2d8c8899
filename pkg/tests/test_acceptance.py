"""Acceptance suite: ten end-to-end go/no-go checks.

Each criterion is one test function, so a verbose run prints one pass or
fail line per criterion.  Every check also prints a short metric summary.
Thresholds, trial counts, and tolerances are frozen here on purpose; do
not loosen them to make a failing build green.
"""

import json
import math
import random
import time

import mpmath
import pytest

from cascade_opt import (
    DatasetSplit,
    GridSpec,
    SimConfig,
    ThresholdVector,
    default_model_specs,
    default_skill,
    dollars_to_micro,
    evaluate_record,
    exit_index,
    generalization_epsilon,
    generate,
    mdc,
    mdc_cap,
    normal_quantile,
    optimize,
    oracle_optimize,
    recommended_grid_resolution,
    run_trials,
    score_records,
    sweep_budgets,
)
from cascade_opt.cli import EXIT_OK, main

TRIALS = 300
ALPHAS = (0.05, 0.1)


def _coverage_run(specs, budget, seed, token_cap=None):
    config = SimConfig(num_models=3, n_records=1, skill=default_skill(3),
                       seed=0, token_cap=token_cap)
    grid = GridSpec(grid_resolution=6, num_models=3)
    out = {}
    start = time.monotonic()
    for alpha in ALPHAS:
        out[alpha] = run_trials(config, specs, grid, budget, alpha, TRIALS,
                                seed, n_ss=150, n_cal=50, n_test=200)
    return out, time.monotonic() - start


@pytest.fixture(scope="module")
def coverage_fixed():
    # flat per-query pricing: 50 / 500 / 5000 micro-dollars per position
    specs = default_model_specs(3, fixed_costs=[0.00005, 0.0005, 0.005])
    return _coverage_run(specs, budget=4000, seed=101)


@pytest.fixture(scope="module")
def coverage_token():
    # token-metered ladder with heavy-tailed generation lengths, capped
    return _coverage_run(default_model_specs(3), budget=500, seed=202,
                         token_cap=600)


def _check_coverage(results, elapsed, label):
    for alpha in ALPHAS:
        trials, summary = results[alpha]
        assert summary.n_trials == TRIALS
        assert summary.certified_trials >= TRIALS // 2
        assert summary.pooled_test_count >= 200 * summary.certified_trials
        bar = alpha + 3 * math.sqrt(alpha * (1 - alpha) / summary.pooled_test_count)
        assert summary.pooled_violation_rate <= bar, (
            f"{label}: pooled rate {summary.pooled_violation_rate} exceeds "
            f"{bar} at alpha {alpha}"
        )
        print(f"PASS {label} alpha={alpha}: pooled="
              f"{summary.pooled_violation_rate:.4f} bar={bar:.4f} "
              f"certified={summary.certified_trials}/{TRIALS}")
    assert elapsed < 300.0, f"{label} took {elapsed:.0f}s"


def test_criterion_1_search_matches_exhaustive_oracle():
    rng = random.Random(701)
    start = time.monotonic()
    checked = infeasible = 0
    for m in (2, 3, 4):
        for resolution in (3, 4, 5, 6):
            for _ in range(9):
                n_ss = rng.randint(10, 80)
                n_cal = rng.randint(10, 80)
                seed = rng.randrange(2**31)
                records = generate(SimConfig(
                    num_models=m, n_records=n_ss + n_cal,
                    skill=default_skill(m), seed=seed))
                split = DatasetSplit(ss=tuple(records[:n_ss]),
                                     cal=tuple(records[n_ss:]), seed=seed)
                specs = default_model_specs(m)
                grid = GridSpec(grid_resolution=resolution, num_models=m)
                budget = dollars_to_micro(
                    rng.choice([0.00002, 0.0002, 0.001, 0.003, 0.02]))
                alpha = rng.choice([0.05, 0.1, 0.2])
                fast = optimize(split, grid, budget, alpha, specs)
                slow = oracle_optimize(split, grid, budget, alpha, specs)
                assert fast == slow, (m, resolution, n_ss, n_cal, seed, budget)
                checked += 1
                infeasible += not fast.feasible
    elapsed = time.monotonic() - start
    assert checked >= 100
    assert infeasible >= 1 and infeasible < checked
    assert elapsed < 60.0
    print(f"PASS criterion 1: {checked} instances identical "
          f"({infeasible} infeasible) in {elapsed:.1f}s")


def test_criterion_2_coverage_with_fixed_costs(coverage_fixed):
    results, elapsed = coverage_fixed
    _check_coverage(results, elapsed, "criterion 2")


def test_criterion_3_coverage_with_token_pricing(coverage_token):
    results, elapsed = coverage_token
    _check_coverage(results, elapsed, "criterion 3")


def test_criterion_4_generalization_radius():
    eps = generalization_epsilon(3, 10, 150, 0.05)
    assert eps == pytest.approx(0.159, abs=1e-3)
    for m, resolution, n, delta in ((3, 10, 150, 0.05), (2, 3, 1000, 0.5),
                                    (4, 6, 77, 0.1)):
        ratio = (generalization_epsilon(m, resolution, n, delta)
                 / generalization_epsilon(m, resolution, 4 * n, delta))
        assert ratio == pytest.approx(2.0, rel=1e-12)
    print(f"PASS criterion 4: epsilon={eps:.6f}, quadrupling halves it")


def test_criterion_5_train_test_regret_gap(coverage_fixed):
    results, _ = coverage_fixed
    for alpha in ALPHAS:
        _, summary = results[alpha]
        assert summary.epsilon == pytest.approx(
            generalization_epsilon(3, 6, 150, 0.05))
        assert summary.gap_within_epsilon_fraction >= 0.95
        print(f"PASS criterion 5 alpha={alpha}: gap within epsilon in "
              f"{summary.gap_within_epsilon_fraction:.3f} of trials")


def test_criterion_6_minimum_detectable_difference():
    value = mdc(0.5, 0.5, 150, 0.05)
    assert value == pytest.approx(0.1132, abs=1e-3)
    assert mdc_cap(150) == value
    for n in (1, 4, 36, 150, 2000, 10**8):
        assert mdc_cap(n) <= 1.386 / math.sqrt(n)
    assert recommended_grid_resolution(150) == 10
    assert recommended_grid_resolution(4) == 3
    assert recommended_grid_resolution(10**8) == 10
    print(f"PASS criterion 6: mdc cap(150)={value:.6f}, "
          f"recommendations clamped to [3, 10]")


def test_criterion_7_exit_monotonicity_and_identities():
    rng = random.Random(99)
    cases = failures = 0
    for m in (2, 3, 4):
        specs = default_model_specs(m)
        scored = score_records(
            generate(SimConfig(num_models=m, n_records=40,
                               skill=default_skill(m), seed=50 + m)),
            specs)
        all_zero = ThresholdVector.all_zero(m)
        all_skip = ThresholdVector.all_skip(m, 6)
        for _ in range(10):
            base = [rng.choice([k / 4 for k in range(6)])
                    for _ in range(m - 1)]
            bump = [min(b + rng.choice([0.0, 0.25, 0.5]), 1.5) for b in base]
            lo = ThresholdVector(taus=(*base, 0.0))
            hi = ThresholdVector(taus=(*bump, 0.0))
            for sr in scored:
                cases += 1
                e_lo = exit_index(sr.scores, lo)
                e_hi = exit_index(sr.scores, hi)
                ok = (
                    e_hi >= e_lo
                    and sr.prefix_costs[e_hi - 1] >= sr.prefix_costs[e_lo - 1]
                    and exit_index(sr.scores, all_zero) == 1
                    and exit_index(sr.scores, all_skip) == m
                    and evaluate_record(sr.record, lo, specs).cost
                    == sr.prefix_costs[e_lo - 1]
                )
                failures += not ok
    assert cases >= 1000
    assert failures == 0
    print(f"PASS criterion 7: {cases} randomized cases, {failures} failures")


def test_criterion_8_normal_quantile_accuracy():
    mpmath.mp.dps = 30
    n = 10_000
    worst = 0.0
    for i in range(1, n + 1):
        p = i / (n + 1)
        exact = float(mpmath.sqrt(2)
                      * mpmath.erfinv(2 * mpmath.mpf(i) / (n + 1) - 1))
        worst = max(worst, abs(normal_quantile(p) - exact))
    assert worst <= 1e-5
    print(f"PASS criterion 8: worst inverse-CDF error {worst:.3e} over "
          f"{n}-point grid")


def test_criterion_9_cli_byte_reproducibility(tmp_path):
    def run(args):
        assert main(args) == EXIT_OK

    def artifacts(tag, jobs):
        root = tmp_path / f"{tag}-j{jobs}"
        data = root / "data"
        run(["simulate", "--records", "80", "--models", "3", "--seed", "3",
             "--out", str(data)])
        base = ["--dataset", str(data / "dataset.jsonl"),
                "--cascade", str(data / "cascade.json")]
        run(["optimize", *base, "--budget", "0.002", "--k", "4",
             "--alpha", "0.1", "--seed", "0", "--jobs", jobs,
             "--out", str(root / "opt")])
        policy = ["--policy", str(root / "opt" / "policy.json")]
        run(["certify", *base, *policy, "--out", str(root / "cert")])
        run(["evaluate", *base, *policy, "--out", str(root / "eval")])
        run(["sweep", *base, "--test-dataset", str(data / "dataset.jsonl"),
             "--budgets", "0.0001,0.001,0.004", "--k", "4", "--alpha", "0.1",
             "--seed", "0", "--jobs", jobs, "--out", str(root / "sweep")])
        run(["simulate", "--trials", "4", "--budget", "0.003", "--models", "2",
             "--k", "4", "--n-ss", "30", "--n-cal", "25", "--n-test", "40",
             "--alpha", "0.1", "--seed", "5", "--jobs", jobs,
             "--out", str(root / "trials")])
        run(["bounds", "--models", "3", "--k", "6", "--n-ss", "150",
             "--out", str(root / "bounds")])
        run(["exec", *base, *policy, "--out", str(root / "exec")])
        names = [
            "data/dataset.jsonl", "data/cascade.json", "opt/policy.json",
            "cert/certification.json", "eval/evaluation.json",
            "eval/evaluation.png", "sweep/sweep.csv", "sweep/sweep.json",
            "sweep/sweep.png", "trials/trials.csv", "trials/trials.json",
            "trials/trials.png", "bounds/bounds.json", "exec/outcomes.jsonl",
        ]
        return {name: (root / name).read_bytes() for name in names}

    first = artifacts("a", "1")
    second = artifacts("b", "1")
    parallel = artifacts("c", "4")
    assert first == second
    assert first == parallel
    print(f"PASS criterion 9: {len(first)} artifacts byte-identical across "
          f"reruns and --jobs 1 vs 4")


def test_criterion_10_sweep_frontier_monotone():
    budgets = [dollars_to_micro(b) for b in
               (0.00002, 0.0001, 0.0004, 0.001, 0.002, 0.004, 0.01)]
    specs = default_model_specs(3)
    grid = GridSpec(grid_resolution=6, num_models=3)
    for seed in range(1000, 1010):
        records = generate(SimConfig(num_models=3, n_records=260,
                                     skill=default_skill(3), seed=seed))
        split = DatasetSplit(ss=tuple(records[:120]),
                             cal=tuple(records[120:180]), seed=seed)
        rows = sweep_budgets(split, grid, budgets, 0.1, specs, records[180:])
        assert not rows[0].feasible  # budget below any achievable cost
        assert rows[-1].feasible
        for a, b in zip(rows, rows[1:]):
            assert a.best_regret >= b.best_regret, f"seed {seed}"
            assert a.mean_cost <= b.mean_cost, f"seed {seed}"
    print("PASS criterion 10: regret non-increasing and spend non-decreasing "
          "over 10 seeded sweeps")
