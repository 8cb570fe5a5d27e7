"""Randomized verification suites for the planner's reliability claims.

Three suites, all deterministic given a seed:

- value-gap suite: random synthetic models, check the value-gap bound
  ||J_model - J_true||_inf <= eta ||J_model||_inf ||J_true||_inf on each;
- filter suite: random models that satisfy the hallucination-filter
  condition, exact-expectation plans on each, check that no decision point
  offering a non-hallucinated candidate ever picks a hallucinated one;
- estimator suite: simulate many L-sample rate estimations against a known
  true rate and compare the frequency of epsilon-overshoot against the
  Hoeffding bound exp(-2 epsilon^2 L).

Each suite yields one row per trial so the CLI can stream CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import uniform_block
from .domain import Incident
from .errors import ConstructionError
from .hallucination import hoeffding_failure_bound
from .planner import PlannerConfig, plan
from .response_model import SyntheticConfig, SyntheticModel, build_synthetic
from .rng import Stream
from .value_analysis import check_filter_condition, lemma1_check

_SUITE_SALT = 0x5EED


def synthetic_probe_incident(tag: str = "synthetic-probe") -> Incident:
    """A minimal plannable incident for suites that only need a placeholder."""
    return Incident(
        id=tag,
        system_description="synthetic evaluation harness",
        logs=("synthetic trial log line",),
    )


def random_config(
    trial_seed: int,
    lambda_max: float = 0.3,
    lambda_min: float = 0.0,
    n_actions_range: tuple[int, int] = (3, 8),
    hallucinated_max: float = 0.5,
) -> SyntheticConfig:
    """Draw a randomized synthetic-model recipe for one trial."""
    stream = Stream(trial_seed, _SUITE_SALT)
    lo, hi = n_actions_range
    n_actions = lo + int(stream.uniform() * (hi - lo + 1))
    n_actions = min(n_actions, hi)
    # Keep at least one non-hallucinated action after rounding.
    max_frac = min(hallucinated_max, (n_actions - 1) / n_actions - 1e-9)
    hallucinated = stream.uniform() * max_frac
    unnecessary = stream.uniform() * 0.4
    lam = lambda_min + stream.uniform() * (lambda_max - lambda_min)
    progress_bias = 0.6 + stream.uniform() * 0.4
    return SyntheticConfig(
        n_actions=n_actions,
        hallucinated_fraction=hallucinated,
        unnecessary_fraction=unnecessary,
        kernel_mixing_lambda=lam,
        progress_bias=progress_bias,
        seed=trial_seed,
    )


@dataclass(frozen=True)
class ValueGapTrial:
    model_seed: int
    eta: float
    j_inf_norm: float
    j_tilde_inf_norm: float
    lhs: float
    rhs: float
    holds: bool

    csv_fields = (
        "model_seed", "eta", "j_inf_norm", "j_tilde_inf_norm", "lhs", "rhs", "holds",
    )


def run_lemma1_trials(
    count: int, seed: int = 0, lambda_max: float = 0.3
) -> list[ValueGapTrial]:
    """Check the value-gap bound on ``count`` random solvable models."""
    trials = []
    for k in range(count):
        trial_seed = Stream(seed).child(k).key
        config = random_config(trial_seed, lambda_max=lambda_max)
        model = build_synthetic(config)
        report = lemma1_check(model)
        trials.append(
            ValueGapTrial(
                model_seed=trial_seed,
                eta=report.eta,
                j_inf_norm=report.j_inf_norm,
                j_tilde_inf_norm=report.j_tilde_inf_norm,
                lhs=report.lhs,
                rhs=report.rhs,
                holds=report.holds,
            )
        )
    return trials


@dataclass(frozen=True)
class FilterTrial:
    model_seed: int
    delta: float
    eta: float
    j_inf_norm: float
    j_tilde_inf_norm: float
    condition_rhs: float
    decision_points: int
    guarded_points: int
    violations: int
    holds: bool

    csv_fields = (
        "model_seed", "delta", "eta", "j_inf_norm", "j_tilde_inf_norm",
        "condition_rhs", "decision_points", "guarded_points", "violations", "holds",
    )


def _plan_hallucination_violations(
    model: SyntheticModel, config: PlannerConfig
) -> tuple[int, int, int]:
    """Run one exact plan; count decision points and filter violations.

    A guarded point is a step whose candidate set contains at least one
    non-hallucinated action; a violation is a guarded point that still
    selected a hallucinated action.
    """
    incident = synthetic_probe_incident()
    result = plan(model, incident, config)
    decision_points = len(result.steps)
    guarded = 0
    violations = 0
    for step in result.steps:
        flags = [model.hallucinated[c.action.synthetic_id] for c in step.candidates]
        if not all(flags):
            guarded += 1
            if model.hallucinated[step.action.synthetic_id]:
                violations += 1
    return decision_points, guarded, violations


def run_prop1_trials(
    count: int,
    seed: int = 0,
    lambda_max: float = 0.01,
    max_draws: int | None = None,
) -> list[FilterTrial]:
    """Gather ``count`` models satisfying the filter condition and plan on each.

    Models are drawn with small prediction divergence (half the draws use
    lambda = 0) because the condition is strict; draws failing it are
    discarded. Raises ConstructionError if the draw budget runs out.
    """
    if max_draws is None:
        max_draws = count * 40
    trials = []
    draws = 0
    k = 0
    while len(trials) < count:
        if draws >= max_draws:
            raise ConstructionError(
                f"only {len(trials)}/{count} models satisfied the filter "
                f"condition after {draws} draws"
            )
        trial_seed = Stream(seed, 1).child(k).key
        k += 1
        draws += 1
        lam_max = 0.0 if k % 2 == 0 else lambda_max
        config = random_config(trial_seed, lambda_max=lam_max, hallucinated_max=0.5)
        model = build_synthetic(config)
        report = check_filter_condition(model)
        if not report.holds:
            continue
        planner_config = PlannerConfig(
            n_candidates=3,
            exact_expectation=True,
            seed=trial_seed & 0xFFFFFFFF,
        )
        points, guarded, violations = _plan_hallucination_violations(
            model, planner_config
        )
        trials.append(
            FilterTrial(
                model_seed=trial_seed,
                delta=report.delta,
                eta=report.eta,
                j_inf_norm=report.j_inf_norm,
                j_tilde_inf_norm=report.j_tilde_inf_norm,
                condition_rhs=report.rhs,
                decision_points=points,
                guarded_points=guarded,
                violations=violations,
                holds=violations == 0,
            )
        )
    return trials


@dataclass(frozen=True)
class EstimatorTrialSummary:
    true_rate: float
    sample_count: int
    epsilon: float
    trials: int
    overshoots: int
    empirical_failure_rate: float
    hoeffding_bound: float
    holds: bool

    csv_fields = (
        "true_rate", "sample_count", "epsilon", "trials", "overshoots",
        "empirical_failure_rate", "hoeffding_bound", "holds",
    )


def run_prop2_trial(
    true_rate: float = 0.3,
    sample_count: int = 30,
    epsilon: float = 0.2,
    trials: int = 100_000,
    seed: int = 0,
) -> EstimatorTrialSummary:
    """Simulate repeated rate estimation and compare against the bound.

    Each trial draws ``sample_count`` Bernoulli(true_rate) labels, forms the
    empirical rate, and records whether the truth overshoots it by at least
    epsilon. The empirical overshoot frequency must sit below
    exp(-2 epsilon^2 L).
    """
    key = Stream(seed, 2).key
    total = trials * sample_count
    # Chunked so the 100k-trial acceptance run stays well under memory
    # limits; chunks hold whole trials so reshape stays aligned.
    chunk = (2_000_000 // sample_count) * sample_count
    overshoots = 0
    done = 0
    while done < total:
        take = min(chunk, total - done)
        block = uniform_block(key, done, take)
        done += take
        hits = (block < true_rate).astype(np.int64)
        counts = hits.reshape(-1, sample_count).sum(axis=1)
        overshoots += int((true_rate - counts / sample_count >= epsilon).sum())
    rate = overshoots / trials
    bound = hoeffding_failure_bound(epsilon, sample_count)
    return EstimatorTrialSummary(
        true_rate=true_rate,
        sample_count=sample_count,
        epsilon=epsilon,
        trials=trials,
        overshoots=overshoots,
        empirical_failure_rate=rate,
        hoeffding_bound=bound,
        holds=rate <= bound,
    )


@dataclass(frozen=True)
class TrendPoint:
    n_candidates: int
    selections: int
    hallucinated_selections: int
    empirical_rate: float
    reference_rate: float
    standard_error: float

    csv_fields = (
        "n_candidates", "selections", "hallucinated_selections",
        "empirical_rate", "reference_rate", "standard_error",
    )


def run_selection_trend(
    per_candidate_rate: float = 0.14,
    n_values: tuple[int, ...] = (1, 2, 3, 4),
    selections: int = 10_000,
    seed: int = 0,
) -> list[TrendPoint]:
    """Measure how candidate count suppresses hallucinated selections.

    Uses a zero-divergence synthetic model whose uniform proposal carries
    exactly ``per_candidate_rate`` hallucinated mass, evaluates candidates by
    exact expectation at the initial state, and repeats the selection
    ``selections`` times per N. With zero divergence a hallucinated action
    can only win when the whole candidate set is hallucinated, so the
    reference rate is per_candidate_rate ** N.
    """
    n_actions = _exact_fraction_actions(per_candidate_rate)
    config = SyntheticConfig(
        n_actions=n_actions,
        hallucinated_fraction=per_candidate_rate,
        unnecessary_fraction=0.0,
        kernel_mixing_lambda=0.0,
        progress_bias=0.9,
        seed=seed,
    )
    model = build_synthetic(config)
    hall = np.array(model.hallucinated)
    assert hall.mean() == per_candidate_rate
    from .value_analysis import induced_chain, solve_time_to_go

    chain = induced_chain(model.model_kernels, model.proposal)
    j_model = solve_time_to_go(chain).values
    q_by_action = 1.0 + model._model_stack[:, 0, :] @ j_model
    points = []
    for n in n_values:
        key = Stream(seed, 3).child(n).key
        u = uniform_block(key, 0, selections * n).reshape(selections, n)
        candidate_ids = np.minimum(
            (u[..., None] >= model._proposal_cum[0][None, None, :]).sum(axis=2),
            n_actions - 1,
        )
        qs = q_by_action[candidate_ids]
        chosen = candidate_ids[np.arange(selections), qs.argmin(axis=1)]
        count = int(hall[chosen].sum())
        rate = count / selections
        reference = per_candidate_rate ** n
        se = math.sqrt(max(reference * (1 - reference), 1e-12) / selections)
        points.append(
            TrendPoint(
                n_candidates=n,
                selections=selections,
                hallucinated_selections=count,
                empirical_rate=rate,
                reference_rate=reference,
                standard_error=se,
            )
        )
    return points


def _exact_fraction_actions(rate: float, max_actions: int = 200) -> int:
    """Smallest action count for which rate * count is a whole number."""
    for n in range(2, max_actions + 1):
        k = rate * n
        if abs(k - round(k)) < 1e-12 and 1 <= round(k) < n:
            return n
    raise ConstructionError(f"cannot realize rate {rate} exactly")
