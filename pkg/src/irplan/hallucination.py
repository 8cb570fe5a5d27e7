"""Hallucination-rate estimation with finite-sample guarantees.

Drawing L candidate actions at the initial state and counting the
hallucinated ones gives an empirical rate h_bar. A one-sided Hoeffding bound
turns that into a guarantee: the true rate exceeds h_bar + epsilon with
probability at most exp(-2 epsilon^2 L). Because the planner picks the best
of N independent candidates, the chance that every candidate in a set is
hallucinated is bounded by (h_bar + epsilon)^N, which decays geometrically
in N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .domain import INITIAL_STATE, Incident, ResponseAction
from .errors import DomainError
from .response_model import ResponseModel, SyntheticModel
from .rng import Stream


def hoeffding_failure_bound(epsilon: float, sample_count: int) -> float:
    """P(true rate >= empirical + epsilon) <= exp(-2 epsilon^2 L)."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    return math.exp(-2.0 * epsilon * epsilon * sample_count)


def estimate_confidence(epsilon: float, sample_count: int) -> float:
    """Confidence that the true rate is below empirical + epsilon."""
    return 1.0 - hoeffding_failure_bound(epsilon, sample_count)


def required_epsilon(sample_count: int, confidence: float) -> float:
    """Smallest epsilon achieving the requested confidence at L samples."""
    if not 0.0 < confidence < 1.0:
        raise DomainError("confidence must lie strictly between 0 and 1")
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    return math.sqrt(math.log(1.0 / (1.0 - confidence)) / (2.0 * sample_count))


def joint_bound(empirical_rate: float, epsilon: float, n_candidates: int) -> float:
    """(h_bar + epsilon)^N, the chance an all-hallucinated candidate set slips through.

    When h_bar + epsilon >= 1 the per-candidate bound is clamped to 1 and the
    joint bound degenerates to 1 (vacuous); ``bound_is_vacuous`` reports that
    case.
    """
    if n_candidates < 1:
        raise DomainError("n_candidates must be >= 1")
    if empirical_rate < 0 or epsilon < 0:
        raise DomainError("rate and epsilon must be non-negative")
    per_candidate = min(1.0, empirical_rate + epsilon)
    return per_candidate ** n_candidates


def bound_is_vacuous(empirical_rate: float, epsilon: float) -> bool:
    return empirical_rate + epsilon >= 1.0


@dataclass(frozen=True)
class HallucinationEstimate:
    """An empirical hallucination rate with its confidence envelope."""

    sample_count: int
    hallucinated_count: int
    empirical_rate: float
    epsilon: float
    confidence: float
    joint_bound_n: int
    joint_bound: float
    vacuous: bool

    def __post_init__(self):
        if not 0 <= self.hallucinated_count <= self.sample_count:
            raise DomainError("hallucinated_count out of range")

    def to_json_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "hallucinated_count": self.hallucinated_count,
            "empirical_rate": self.empirical_rate,
            "epsilon": self.epsilon,
            "confidence": self.confidence,
            "joint_bound_n": self.joint_bound_n,
            "joint_bound": self.joint_bound,
            "vacuous": self.vacuous,
        }


def assemble_estimate(
    sample_count: int,
    hallucinated_count: int,
    confidence: float,
    n_candidates: int,
) -> HallucinationEstimate:
    epsilon = required_epsilon(sample_count, confidence)
    rate = hallucinated_count / sample_count
    return HallucinationEstimate(
        sample_count=sample_count,
        hallucinated_count=hallucinated_count,
        empirical_rate=rate,
        epsilon=epsilon,
        confidence=confidence,
        joint_bound_n=n_candidates,
        joint_bound=joint_bound(rate, epsilon, n_candidates),
        vacuous=bound_is_vacuous(rate, epsilon),
    )


def estimate_from_samples(
    model: ResponseModel,
    incident: Incident,
    sample_count: int,
    confidence: float,
    n_candidates: int,
    stream: Stream,
    oracle: Callable[[ResponseAction], bool] | None = None,
) -> HallucinationEstimate:
    """Estimate the proposal's hallucination rate from live draws.

    Samples are drawn at the initial state only: the planner's exposure to
    hallucinated candidates starts there, and per-state estimation would need
    L draws per state. ``oracle`` classifies an action as hallucinated; for
    synthetic backends it defaults to the model's own label table.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    if oracle is None:
        if isinstance(model, SyntheticModel):
            oracle = lambda action: model.hallucinated[action.synthetic_id]
        else:
            raise DomainError(
                "an oracle labeling actions is required for this backend"
            )
    actions = model.propose_actions(INITIAL_STATE, incident, sample_count, stream)
    count = sum(1 for action in actions if oracle(action))
    return assemble_estimate(sample_count, count, confidence, n_candidates)
