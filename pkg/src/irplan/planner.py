"""Rollout planner over recovery states.

At each step the planner asks the model for N candidate actions, estimates
the remaining recovery time of each, executes the cheapest, and asks the
model where that action leads. The estimate is either a Monte-Carlo mean of M
simulated rollouts (the model predicts its own future the whole way down) or,
on backends exposing exact kernels, the closed-form one-step expectation
against the model's predicted time-to-go.

Determinism contract: candidate i at step t consumes only the stream derived
from (seed, t, i), proposals consume (seed, t, PROPOSE) and the executed
transition (seed, t, ADVANCE). Parallel and sequential candidate evaluation
therefore produce identical plans, as do session-mode and batch-mode runs
with the same seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._kernels import rollout_batch
from .domain import (
    INITIAL_STATE,
    CandidateEvaluation,
    Incident,
    PlanResult,
    RecoveryState,
    ResponseAction,
    TrajectoryStep,
)
from .errors import (
    CapabilityError,
    ContractViolation,
    DomainError,
    ModelQueryError,
    PlanAborted,
)
from .response_model import ResponseModel, SyntheticModel
from .rng import Stream

# Reserved stream indices at each step; candidate indices occupy 0..N-1.
STREAM_PROPOSE = 1 << 32
STREAM_ADVANCE = (1 << 32) + 1
STREAM_OVERRIDE = (1 << 32) + 2


@dataclass(frozen=True)
class PlannerConfig:
    """Planner knobs; defaults follow the evaluation setup."""

    n_candidates: int = 3
    m_samples: int = 3
    max_rollout_depth: int = 32
    max_plan_steps: int = 64
    exact_expectation: bool = False
    parallel_candidates: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("n_candidates", "m_samples", "max_rollout_depth", "max_plan_steps"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")

    def to_json_dict(self) -> dict:
        return {
            "n_candidates": self.n_candidates,
            "m_samples": self.m_samples,
            "max_rollout_depth": self.max_rollout_depth,
            "max_plan_steps": self.max_plan_steps,
            "exact_expectation": self.exact_expectation,
            "parallel_candidates": self.parallel_candidates,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PlannerConfig":
        known = {f: data[f] for f in (
            "n_candidates",
            "m_samples",
            "max_rollout_depth",
            "max_plan_steps",
            "exact_expectation",
            "parallel_candidates",
            "seed",
        ) if f in data}
        try:
            return cls(**known)
        except TypeError as exc:
            raise DomainError(f"malformed planner config JSON: {exc}") from exc


class RolloutOutcome(NamedTuple):
    length: float
    censored: bool


def rollout_recovery_time(
    model: ResponseModel,
    state: RecoveryState,
    action: ResponseAction,
    incident: Incident,
    depth_budget: int,
    stream: Stream,
) -> RolloutOutcome:
    """Simulate recovery under the model's own predictions.

    Applies the given action, then repeatedly samples a fresh action and
    applies it, counting steps until a predicted terminal state. A rollout
    that exhausts depth_budget reports exactly depth_budget, censored.
    """
    if state.terminal:
        raise ContractViolation("rollouts start from a non-terminal state")
    if depth_budget < 1:
        raise DomainError("depth_budget must be >= 1")
    current = state
    current_action = action
    steps = 0
    while True:
        current = model.predict_next_state(current, current_action, incident, stream)
        steps += 1
        if current.terminal:
            return RolloutOutcome(float(steps), False)
        if steps >= depth_budget:
            return RolloutOutcome(float(depth_budget), True)
        current_action = model.propose_actions(current, incident, 1, stream)[0]


def _batched_synthetic_rollouts(
    model: SyntheticModel,
    state: RecoveryState,
    action: ResponseAction,
    m: int,
    depth_budget: int,
    stream: Stream,
) -> tuple[np.ndarray, int]:
    keys = stream.child_keys(m)
    lengths, censored = rollout_batch(
        model._model_cum,
        model._proposal_cum,
        state.index,
        model._action_index(action),
        depth_budget,
        keys,
        model._model_cum.shape[1] - 1,
    )
    return lengths, int(censored.sum())


def _exact_q(model: SyntheticModel, state: RecoveryState, action: ResponseAction) -> float:
    cache = model._value_cache
    j_model = cache.get("j_model")
    if j_model is None:
        from .value_analysis import induced_chain, solve_time_to_go

        chain = induced_chain(model.model_kernels, model.proposal)
        j_model = solve_time_to_go(chain).values
        cache["j_model"] = j_model
    row = model._model_stack[model._action_index(action), state.index]
    return float(1.0 + row @ j_model)


def estimate_q(
    model: ResponseModel,
    state: RecoveryState,
    action: ResponseAction,
    incident: Incident,
    config: PlannerConfig,
    stream: Stream,
) -> CandidateEvaluation:
    """Estimate the expected recovery time of taking action now.

    Monte-Carlo mode averages M rollouts drawn from stream children 0..M-1;
    exact mode computes 1 + model_kernel_row . J_model and needs a backend
    with exact kernels. Synthetic Monte-Carlo runs on the batched kernel path
    but consumes the same stream draws as the generic interface path, so both
    yield identical evaluations.
    """
    if state.terminal:
        raise ContractViolation("cannot evaluate candidates at a terminal state")
    if config.exact_expectation:
        if not model.exposes_exact_kernels:
            raise CapabilityError(
                "exact-expectation mode needs a backend exposing kernels"
            )
        q = _exact_q(model, state, action)
        return CandidateEvaluation(action=action, q_estimate=q)
    m = config.m_samples
    if isinstance(model, SyntheticModel):
        lengths, censored = _batched_synthetic_rollouts(
            model, state, action, m, config.max_rollout_depth, stream
        )
        lengths_tuple = tuple(float(x) for x in lengths)
    else:
        outcomes = [
            rollout_recovery_time(
                model, state, action, incident, config.max_rollout_depth, stream.child(k)
            )
            for k in range(m)
        ]
        lengths_tuple = tuple(o.length for o in outcomes)
        censored = sum(1 for o in outcomes if o.censored)
    q = float(np.mean(lengths_tuple))
    return CandidateEvaluation(
        action=action,
        q_estimate=q,
        rollout_lengths=lengths_tuple,
        censored_count=censored,
    )


def select_action(evaluations: Sequence[CandidateEvaluation]) -> int:
    """Index of the lowest estimate; ties go to the lowest index."""
    if not evaluations:
        raise DomainError("cannot select from an empty candidate set")
    return min(range(len(evaluations)), key=lambda i: (evaluations[i].q_estimate, i))


def evaluate_candidates(
    model: ResponseModel,
    state: RecoveryState,
    incident: Incident,
    actions: Sequence[ResponseAction],
    config: PlannerConfig,
    step_stream: Stream,
) -> list[CandidateEvaluation]:
    """Evaluate each candidate on its own (seed, t, i) stream.

    With parallel_candidates the evaluations run on a thread pool; stream
    isolation guarantees the result is identical either way.
    """
    streams = [step_stream.child(i) for i in range(len(actions))]
    if config.parallel_candidates and len(actions) > 1:
        with ThreadPoolExecutor(max_workers=len(actions)) as pool:
            return list(
                pool.map(
                    lambda pair: estimate_q(
                        model, state, pair[0], incident, config, pair[1]
                    ),
                    zip(actions, streams),
                )
            )
    return [
        estimate_q(model, state, action, incident, config, stream)
        for action, stream in zip(actions, streams)
    ]


def plan(
    model: ResponseModel,
    incident: Incident,
    config: PlannerConfig,
    initial_state: RecoveryState = INITIAL_STATE,
) -> PlanResult:
    """Run the full planning loop until terminal or step budget.

    Fully deterministic given config.seed. If a model query fails mid-plan,
    raises PlanAborted carrying the trajectory completed so far.
    """
    if not incident.plannable:
        raise DomainError(
            f"incident {incident.id!r} has no log lines; nothing to plan"
        )
    root = Stream(config.seed)
    state = initial_state
    steps: list[TrajectoryStep] = []
    observe = getattr(model, "observe_history", None)
    try:
        while not state.terminal and len(steps) < config.max_plan_steps:
            t = len(steps)
            if observe is not None:
                observe(tuple(steps))
            step_stream = root.child(t)
            actions = model.propose_actions(
                state, incident, config.n_candidates, step_stream.child(STREAM_PROPOSE)
            )
            evaluations = evaluate_candidates(
                model, state, incident, actions, config, step_stream
            )
            chosen = evaluations[select_action(evaluations)]
            next_state = model.predict_next_state(
                state, chosen.action, incident, step_stream.child(STREAM_ADVANCE)
            )
            steps.append(
                TrajectoryStep(
                    time_index=t,
                    state_before=state,
                    action=chosen.action,
                    state_after=next_state,
                    q_estimate=chosen.q_estimate,
                    candidates=tuple(evaluations),
                )
            )
            state = next_state
    except ModelQueryError as exc:
        partial = PlanResult(
            steps=tuple(steps),
            reached_terminal=state.terminal,
            truncated=False,
            seed=config.seed,
        )
        raise PlanAborted(f"model query failed at step {len(steps)}: {exc}", partial) from exc
    return PlanResult(
        steps=tuple(steps),
        reached_terminal=state.terminal,
        truncated=not state.terminal,
        seed=config.seed,
    )
