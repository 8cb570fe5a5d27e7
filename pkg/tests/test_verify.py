"""Randomized reliability suites, exercised at small trial counts."""

import pytest

from irplan.errors import ConstructionError, DomainError
from irplan.hallucination import hoeffding_failure_bound
from irplan.verify import (
    EstimatorTrialSummary,
    FilterTrial,
    TrendPoint,
    ValueGapTrial,
    _exact_fraction_actions,
    random_config,
    run_lemma1_trials,
    run_prop1_trials,
    run_prop2_trial,
    run_selection_trend,
    synthetic_probe_incident,
)


def test_probe_incident_is_plannable():
    incident = synthetic_probe_incident("tag-x")
    assert incident.plannable
    assert incident.id == "tag-x"


def test_random_config_stays_in_bounds():
    for trial in range(40):
        config = random_config(trial, lambda_max=0.3)
        assert 3 <= config.n_actions <= 8
        assert 0.0 <= config.kernel_mixing_lambda <= 0.3
        assert 0.0 <= config.hallucinated_fraction < 0.5
        assert config.seed == trial
    assert random_config(7) == random_config(7)


# --- value-gap suite ---------------------------------------------------------

def test_value_gap_suite_all_hold():
    trials = run_lemma1_trials(25, seed=0, lambda_max=0.3)
    assert len(trials) == 25
    assert all(t.holds for t in trials)
    assert all(t.lhs <= t.rhs + 1e-9 for t in trials)
    # seeds differ per trial, so etas are not all equal
    assert len({t.eta for t in trials}) > 1


def test_value_gap_suite_deterministic():
    assert run_lemma1_trials(5, seed=3) == run_lemma1_trials(5, seed=3)
    assert run_lemma1_trials(5, seed=3) != run_lemma1_trials(5, seed=4)


# --- filter suite --------------------------------------------------------------

def test_filter_suite_no_violations():
    trials = run_prop1_trials(12, seed=0)
    assert len(trials) == 12
    for t in trials:
        assert t.violations == 0
        assert t.holds
        assert t.delta > t.condition_rhs
        assert 0 <= t.guarded_points <= t.decision_points


def test_filter_suite_exhausts_draw_budget():
    with pytest.raises(ConstructionError, match="satisfied the filter"):
        run_prop1_trials(5, seed=0, max_draws=2)


# --- estimator suite -------------------------------------------------------------

def test_estimator_suite_respects_hoeffding():
    summary = run_prop2_trial(
        true_rate=0.3, sample_count=30, epsilon=0.2, trials=5000, seed=0
    )
    assert summary.holds
    assert summary.hoeffding_bound == hoeffding_failure_bound(0.2, 30)
    assert summary.empirical_failure_rate == summary.overshoots / 5000
    assert summary.empirical_failure_rate <= summary.hoeffding_bound


def test_estimator_suite_deterministic():
    a = run_prop2_trial(trials=2000, seed=9)
    b = run_prop2_trial(trials=2000, seed=9)
    assert a == b


def test_estimator_suite_overshoots_do_happen():
    # a loose epsilon at tiny L must show some overshoot mass, otherwise the
    # comparison against the bound is trivially satisfied
    summary = run_prop2_trial(
        true_rate=0.5, sample_count=5, epsilon=0.1, trials=5000, seed=0
    )
    assert summary.overshoots > 0


# --- selection trend --------------------------------------------------------------

def test_selection_trend_decays_geometrically():
    points = run_selection_trend(
        per_candidate_rate=0.14, n_values=(1, 2, 3, 4), selections=5000, seed=0
    )
    assert [p.n_candidates for p in points] == [1, 2, 3, 4]
    rates = [p.empirical_rate for p in points]
    assert rates == sorted(rates, reverse=True)
    for p in points:
        assert p.reference_rate == pytest.approx(0.14 ** p.n_candidates)
        assert p.empirical_rate <= p.reference_rate + 3.0 * p.standard_error
        assert p.hallucinated_selections == round(p.empirical_rate * p.selections)


def test_exact_fraction_actions():
    assert _exact_fraction_actions(0.25) == 4
    assert _exact_fraction_actions(0.5) == 2
    assert _exact_fraction_actions(0.14) == 50
    with pytest.raises(ConstructionError):
        _exact_fraction_actions(0.123456789)


# --- csv row contracts --------------------------------------------------------------

def test_csv_fields_cover_dataclass_attributes():
    for cls in (ValueGapTrial, FilterTrial, EstimatorTrialSummary, TrendPoint):
        fields = cls.csv_fields
        assert len(fields) == len(set(fields))
        assert set(fields) == set(cls.__dataclass_fields__)
