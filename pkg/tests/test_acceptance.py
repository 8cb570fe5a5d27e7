"""Acceptance gate.

Each test exercises one shipping criterion end to end at its stated tolerance
and prints a single [PASS]/[FAIL] line with the measured numbers (run with -s
or -rA to see them all). These are deliberately redundant with the unit
suites: this file alone should tell a release manager whether the engine does
what it promises.
"""

import math
import time

import numpy as np

from irplan.domain import N_STATES, TERMINAL_INDEX, ResponseAction, state_from_index
from irplan.evaluation import StepLabel, score_plan, synthetic_step_labels
from irplan.hallucination import estimate_confidence, joint_bound
from irplan.bench import measure_scaling
from irplan.planner import PlannerConfig, estimate_q, plan
from irplan.response_model import (
    SyntheticConfig,
    SyntheticModel,
    TransitionKernel,
    build_synthetic,
)
from irplan.rng import Stream
from irplan.verify import (
    run_lemma1_trials,
    run_prop1_trials,
    run_prop2_trial,
    run_selection_trend,
    synthetic_probe_incident,
)


def check(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_value_gap_bound_over_1000_models():
    started = time.perf_counter()
    trials = run_lemma1_trials(1000, seed=0, lambda_max=0.3)
    elapsed = time.perf_counter() - started
    holding = sum(
        t.lhs <= t.eta * t.j_tilde_inf_norm * t.j_inf_norm + 1e-6 for t in trials
    )
    ok = len(trials) == 1000 and holding == 1000 and elapsed < 60.0
    check(
        "value-gap bound",
        ok,
        f"{holding}/{len(trials)} models within eta*|J~|*|J| + 1e-6 in {elapsed:.1f}s",
    )


def test_filtered_models_never_pick_hallucinated_actions():
    started = time.perf_counter()
    trials = run_prop1_trials(500, seed=0)
    elapsed = time.perf_counter() - started
    violations = sum(t.violations for t in trials)
    guarded = sum(t.guarded_points for t in trials)
    ok = (
        len(trials) == 500
        and violations == 0
        and guarded > 0
        and all(t.delta > t.condition_rhs for t in trials)
        and elapsed < 120.0
    )
    check(
        "filtered-planner purity",
        ok,
        f"{violations} hallucinated selections across {guarded} guarded decision "
        f"points on {len(trials)} filtered models in {elapsed:.1f}s",
    )


def test_estimator_concentration_matches_analytic_bound():
    started = time.perf_counter()
    summary = run_prop2_trial(
        true_rate=0.3, sample_count=30, epsilon=0.2, trials=100_000, seed=0
    )
    elapsed = time.perf_counter() - started
    bound = math.exp(-2.4)
    ok = (
        summary.trials == 100_000
        and summary.empirical_failure_rate <= bound
        and abs(summary.hoeffding_bound - bound) < 1e-12
        and elapsed < 120.0
    )
    check(
        "estimator concentration",
        ok,
        f"empirical overshoot rate {summary.empirical_failure_rate:.5f} "
        f"<= {bound:.5f} over {summary.trials} trials in {elapsed:.1f}s",
    )


def test_confidence_curve_reference_points():
    confidence = estimate_confidence(0.1, 1)
    joint = joint_bound(0.3, 0.2, 10)  # rate + epsilon = 0.5, ten candidates
    ok = abs(confidence - 0.019801) <= 1e-6 and abs(joint - 0.0009765625) <= 1e-6
    check(
        "confidence reference points",
        ok,
        f"confidence(eps=0.1, L=1) = {confidence:.6f} (want 0.019801), "
        f"joint(0.5, N=10) = {joint:.10f} (want 0.0009765625)",
    )


def test_selection_hallucination_rate_decays_with_candidates():
    points = run_selection_trend(
        per_candidate_rate=0.14, n_values=(1, 2, 3, 4), selections=10_000, seed=0
    )
    rates = [p.empirical_rate for p in points]
    monotone = all(a >= b for a, b in zip(rates, rates[1:]))
    within = all(
        p.empirical_rate <= p.reference_rate + 3.0 * p.standard_error for p in points
    )
    ok = len(points) == 4 and monotone and within
    check(
        "selection trend",
        ok,
        "rates by N: "
        + ", ".join(f"{p.n_candidates}={p.empirical_rate:.4f}" for p in points)
        + " (references 0.14^N)",
    )


def test_parallel_candidate_evaluation_flattens_wall_time():
    points = {
        (p.n_candidates, p.mode): p.seconds
        for p in measure_scaling(n_values=(1, 4), latency_s=0.05, repeats=3)
    }
    seq_ratio = points[(4, "sequential")] / points[(1, "sequential")]
    par_ratio = points[(4, "parallel")] / points[(1, "parallel")]
    ok = par_ratio <= 2.0 and 3.0 <= seq_ratio <= 5.0
    check(
        "parallel scaling",
        ok,
        f"sequential N=4 is {seq_ratio:.2f}x N=1 (want 4x +-25%), "
        f"parallel N=4 is {par_ratio:.2f}x N=1 (want <= 2x)",
    )


def _walk_model(path: tuple[int, ...]) -> SyntheticModel:
    m = np.zeros((N_STATES, N_STATES))
    hops = dict(zip((0,) + path, path + (TERMINAL_INDEX,)))
    for s in range(TERMINAL_INDEX):
        m[s, hops.get(s, TERMINAL_INDEX)] = 1.0
    m[TERMINAL_INDEX, TERMINAL_INDEX] = 1.0
    kernel = TransitionKernel(m)
    return SyntheticModel(
        actions=(ResponseAction(text="act", synthetic_id=0),),
        true_kernels=(kernel,),
        model_kernels=(kernel,),
        proposal=np.ones((N_STATES, 1)),
        hallucinated=(False,),
        unnecessary=(False,),
        eta=0.0,
        seed=0,
    )


def test_scorer_matches_ground_truth_plan_costs():
    incident = synthetic_probe_incident()
    config = PlannerConfig(seed=0)

    model = _walk_model((1, 3, 7, 15, 31))
    result = plan(model, incident, config)
    labels = synthetic_step_labels(model, result, Stream(0))
    six = score_plan(result, labels)

    longer = _walk_model((1, 3, 7, 15, 31, 62))
    padded = plan(longer, incident, config)
    hand_labels = [
        StepLabel(effective=True, unnecessary=(i == 3))
        for i in range(len(padded.steps))
    ]
    eight = score_plan(padded, hand_labels)

    ok = (
        len(result.steps) == 6
        and six.recovery_time == 6.0
        and not six.failed
        and len(padded.steps) == 7
        and eight.recovery_time == 8.0
    )
    check(
        "plan scorer",
        ok,
        f"six effective actions -> {six.recovery_time}, "
        f"plus one unnecessary -> {eight.recovery_time}",
    )


def test_monte_carlo_estimates_track_exact_expectations():
    m_samples = 10_000
    exact_config = PlannerConfig(seed=0, exact_expectation=True)
    mc_config = PlannerConfig(
        seed=0, m_samples=m_samples, max_rollout_depth=2048
    )
    incident = synthetic_probe_incident()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(50):
        model = build_synthetic(SyntheticConfig(seed=10_000 + trial))
        state = state_from_index(int(rng.integers(0, TERMINAL_INDEX)))
        action = model.actions[int(rng.integers(0, model.n_actions))]
        stream = Stream(7000 + trial)
        exact = estimate_q(model, state, action, incident, exact_config, stream)
        sampled = estimate_q(model, state, action, incident, mc_config, stream)
        assert sampled.censored_count == 0
        spread = float(np.std(sampled.rollout_lengths, ddof=1))
        tolerance = 3.0 * spread / math.sqrt(m_samples)
        gap = abs(sampled.q_estimate - exact.q_estimate)
        worst = max(worst, gap / tolerance if tolerance else math.inf)
        if gap > tolerance:
            check(
                "monte-carlo consistency",
                False,
                f"triple {trial}: |MC - exact| = {gap:.5f} "
                f"exceeds 3*std/sqrt(M) = {tolerance:.5f}",
            )
    check(
        "monte-carlo consistency",
        True,
        f"50 random (model, state, action) triples at M={m_samples}; "
        f"worst gap at {worst:.2f} of the 3-sigma budget",
    )
