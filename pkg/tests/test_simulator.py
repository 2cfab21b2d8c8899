import itertools
import math

import numpy as np
import pytest

from cascade_opt import (
    GridSpec,
    SimConfig,
    default_model_specs,
    default_skill,
    generate,
    run_trials,
    save_dataset,
    score_records,
)


def _config(**kwargs):
    defaults = dict(num_models=2, n_records=50, skill=(0.0, 3.0), seed=7)
    defaults.update(kwargs)
    return SimConfig(**defaults)


def test_generate_is_deterministic(tmp_path):
    config = _config()
    first = generate(config)
    second = generate(config)
    assert first == second
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(first, a)
    save_dataset(second, b)
    assert a.read_bytes() == b.read_bytes()


def test_generate_seeds_differ():
    assert generate(_config(seed=1)) != generate(_config(seed=2))


def test_generate_shapes_and_ids():
    config = _config(num_models=3, skill=(-1.0, 1.0, 3.0), n_records=12)
    records = generate(config)
    assert len(records) == 12
    assert len({r.question_id for r in records}) == 12
    assert records[0].question_id == "sim-7-000000"
    for record in records:
        assert len(record.outputs) == 3
        assert int(record.ground_truth) in range(10)
        for output in record.outputs:
            assert len(output.samples) == 5
            assert output.input_tokens == 500
            assert all(int(s) in range(10) for s in output.samples)


def test_generate_saturating_skills():
    # skill 40 makes every sample correct; skill -44 makes every one wrong
    records = generate(_config(skill=(-44.0, 40.0), n_records=40))
    for record in records:
        weak, strong = record.outputs
        assert all(s != record.ground_truth for s in weak.samples)
        assert all(s == record.ground_truth for s in strong.samples)


def test_generate_token_cap_and_floor():
    capped = generate(_config(token_cap=50, n_records=30))
    for record in capped:
        for output in record.outputs:
            assert 5 <= output.output_tokens <= 5 * 50
    uncapped = generate(_config(n_records=30))
    total = lambda recs: sum(o.output_tokens for r in recs for o in r.outputs)
    assert total(capped) < total(uncapped)


def _expected_modal_share(skill, slope, n_samples=5, answer_space=10,
                          quadrature=400):
    """Exact E[modal sample share] for one model, by enumeration.

    Conditional on difficulty d, the five samples are multinomial over the
    truth (probability p = sigmoid(skill - slope * d)) and the nine
    distractors (probability (1 - p) / 9 each).  Enumerate all weak
    compositions of the sample count, then integrate over d by midpoint
    quadrature.
    """
    coefs, truth_counts, shares = [], [], []
    slots = n_samples + answer_space - 1
    for bars in itertools.combinations(range(slots), answer_space - 1):
        prev, counts = -1, []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(slots - prev - 1)
        coef = math.factorial(n_samples)
        for c in counts:
            coef //= math.factorial(c)
        coefs.append(coef)
        truth_counts.append(counts[0])
        shares.append(max(counts) / n_samples)
    coefs = np.array(coefs, dtype=float)
    truth_counts = np.array(truth_counts)
    shares = np.array(shares)
    total = 0.0
    for i in range(quadrature):
        d = (i + 0.5) / quadrature
        p = 1.0 / (1.0 + math.exp(-(skill - slope * d)))
        q = (1.0 - p) / (answer_space - 1)
        probs = coefs * p ** truth_counts * q ** (n_samples - truth_counts)
        total += float(probs @ shares)
    return total / quadrature


def test_modal_share_matches_enumeration_oracle():
    config = _config(n_records=3000, skill=(0.0, 3.0), seed=42)
    scored = score_records(generate(config), default_model_specs(2))
    observed = float(np.mean([s.scores[0] for s in scored]))
    expected = _expected_modal_share(0.0, config.difficulty_slope)
    # Monte Carlo SE of the mean is below 0.004 here; allow five of them.
    assert observed == pytest.approx(expected, abs=0.02)


def test_confidence_rank_correlates_with_correctness():
    config = _config(n_records=2000, skill=(0.0, 3.0), seed=9)
    records = generate(config)
    scored = score_records(records, default_model_specs(2))
    conf = np.array([s.scores[0] for s in scored])
    correct = np.array(
        [float(s.answers[0] == r.ground_truth) for s, r in zip(scored, records)]
    )

    def ranks(x):
        order = np.argsort(x, kind="stable")
        r = np.empty_like(order, dtype=float)
        r[order] = np.arange(len(x))
        return r

    rho = float(np.corrcoef(ranks(conf), ranks(correct))[0, 1])
    assert rho > 0.15


def test_split_half_means_are_exchangeable():
    records = generate(_config(n_records=2000, seed=31))
    tokens = np.array([r.outputs[0].output_tokens for r in records], dtype=float)
    first, second = tokens[:1000], tokens[1000:]
    se = math.sqrt(first.var(ddof=1) / 1000 + second.var(ddof=1) / 1000)
    assert abs(first.mean() - second.mean()) <= 6 * se


@pytest.mark.parametrize("kwargs", [
    dict(num_models=1, skill=(0.0,)),
    dict(skill=(0.0,)),
    dict(skill=(3.0, 0.0)),
    dict(skill=(1.0, 1.0)),
    dict(difficulty_slope=0.0),
    dict(n_records=0),
    dict(n_samples_per_model=0),
    dict(answer_space=1),
    dict(token_mean=0.0),
    dict(token_sigma=-0.1),
    dict(input_tokens=-1),
    dict(token_cap=0),
    dict(seed=-1),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        _config(**kwargs)


def test_default_skill():
    assert default_skill(2) == (-1.0, 3.0)
    assert default_skill(3) == (-1.0, 1.0, 3.0)
    assert default_skill(5) == (-1.0, 0.0, 1.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        default_skill(1)


def test_default_model_specs_pricing_ladder():
    specs = default_model_specs(3)
    assert [s.model_id for s in specs] == ["sim-model-1", "sim-model-2",
                                           "sim-model-3"]
    assert [float(s.input_price_per_m) for s in specs] == [0.01, 0.08, 0.64]
    assert [float(s.output_price_per_m) for s in specs] == [0.03, 0.24, 1.92]
    assert all(s.fixed_cost is None for s in specs)

    flat = default_model_specs(2, fixed_costs=[0.001, 0.01])
    assert [float(s.fixed_cost) for s in flat] == [0.001, 0.01]
    with pytest.raises(ValueError):
        default_model_specs(3, fixed_costs=[0.001])


def _trial_args(**kwargs):
    args = dict(
        config=_config(n_records=1),
        specs=default_model_specs(2),
        grid=GridSpec(grid_resolution=4, num_models=2),
        budget=3000,
        alpha=0.1,
        n_trials=4,
        seed=5,
        n_ss=30,
        n_cal=25,
        n_test=40,
    )
    args.update(kwargs)
    return args


def test_run_trials_prefix_determinism():
    four, _ = run_trials(**_trial_args(n_trials=4))
    two, _ = run_trials(**_trial_args(n_trials=2))
    assert four[:2] == two
    assert len({t.seed for t in four}) == 4


def test_run_trials_jobs_invariant():
    serial, summary_serial = run_trials(**_trial_args())
    parallel, summary_parallel = run_trials(**_trial_args(), jobs=4)
    assert serial == parallel
    assert summary_serial == summary_parallel


def test_run_trials_summary_is_consistent():
    trials, summary = run_trials(**_trial_args(n_trials=6))
    certified = [t for t in trials if t.certified]
    assert summary.n_trials == 6
    assert summary.certified_trials == len(certified)
    assert summary.pooled_violations == sum(t.violations for t in certified)
    assert summary.pooled_test_count == 40 * len(certified)
    if certified:
        assert summary.pooled_violation_rate == pytest.approx(
            summary.pooled_violations / summary.pooled_test_count)
    finite = [t for t in trials if not math.isinf(t.train_regret)]
    assert summary.certified_trials >= 1  # fixture chosen to certify
    expected_fraction = sum(
        abs(t.test_regret - t.train_regret) <= summary.epsilon for t in finite
    ) / len(finite)
    assert summary.gap_within_epsilon_fraction == pytest.approx(expected_fraction)
    for trial in trials:
        assert trial.violation_rate == pytest.approx(trial.violations / trial.n_test)
        assert 0.0 <= trial.test_regret <= 1.0


def test_run_trials_validation():
    with pytest.raises(ValueError):
        run_trials(**_trial_args(n_trials=0))
    with pytest.raises(ValueError):
        run_trials(**_trial_args(n_cal=0))
