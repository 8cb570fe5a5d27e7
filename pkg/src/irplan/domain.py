"""Core value types: recovery states, incidents, actions, trajectories, plans.

A recovery state is six boolean stage flags. Its canonical index packs the
flags into an integer with containment as the least significant bit and
restoration as the most significant, giving a 64-state space whose terminal
(all stages complete) state has index 63. Stage flags are independent: the
model may clear a stage that was previously complete, so no monotonicity is
assumed anywhere.

All types serialize to plain JSON dicts via ``to_json_dict`` and parse back
via ``from_json_dict`` without loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import DomainError

STAGES: tuple[str, ...] = (
    "containment",
    "assessment",
    "preservation",
    "eviction",
    "hardening",
    "restoration",
)

N_STAGES = len(STAGES)
N_STATES = 1 << N_STAGES
TERMINAL_INDEX = N_STATES - 1

IOC_KINDS: tuple[str, ...] = ("cve", "ipv4", "hostname", "cwe")

ENRICHMENT_SOURCES: tuple[str, ...] = ("local_kb", "remote")


@dataclass(frozen=True, slots=True)
class RecoveryState:
    """Completion flags for the six response stages."""

    containment: bool = False
    assessment: bool = False
    preservation: bool = False
    eviction: bool = False
    hardening: bool = False
    restoration: bool = False

    @property
    def index(self) -> int:
        idx = 0
        for bit, name in enumerate(STAGES):
            if getattr(self, name):
                idx |= 1 << bit
        return idx

    @property
    def terminal(self) -> bool:
        return self.index == TERMINAL_INDEX

    @classmethod
    def from_index(cls, index: int) -> "RecoveryState":
        if not isinstance(index, int) or isinstance(index, bool):
            raise DomainError(f"state index must be an integer, got {index!r}")
        if not 0 <= index < N_STATES:
            raise DomainError(f"state index out of range [0, {N_STATES}): {index}")
        return cls(**{name: bool(index >> bit & 1) for bit, name in enumerate(STAGES)})

    def with_stage(self, stage: str, done: bool = True) -> "RecoveryState":
        if stage not in STAGES:
            raise DomainError(f"unknown stage {stage!r}")
        return replace(self, **{stage: done})

    def completed_stages(self) -> tuple[str, ...]:
        return tuple(name for name in STAGES if getattr(self, name))

    def to_json_dict(self) -> dict:
        return {name: getattr(self, name) for name in STAGES}

    @classmethod
    def from_json_dict(cls, data: dict) -> "RecoveryState":
        if not isinstance(data, dict):
            raise DomainError("recovery state JSON must be an object")
        missing = [name for name in STAGES if name not in data]
        if missing:
            raise DomainError(f"recovery state JSON missing stages: {missing}")
        flags = {}
        for name in STAGES:
            value = data[name]
            if not isinstance(value, bool):
                raise DomainError(f"stage {name!r} must be a boolean, got {value!r}")
            flags[name] = value
        return cls(**flags)


INITIAL_STATE = RecoveryState()
TERMINAL_STATE = RecoveryState.from_index(TERMINAL_INDEX)


def state_from_index(index: int) -> RecoveryState:
    return RecoveryState.from_index(index)


def is_terminal(state: RecoveryState) -> bool:
    return state.terminal


@dataclass(frozen=True, slots=True)
class ResponseAction:
    """One proposed response step.

    ``synthetic_id`` is set for actions drawn from a synthetic backend and
    indexes into its action table. ``unnecessary`` is a ground-truth label
    where one is known; None means unlabeled.
    """

    text: str
    synthetic_id: int | None = None
    unnecessary: bool | None = None

    def __post_init__(self):
        if not isinstance(self.text, str) or not self.text.strip():
            raise DomainError("action text must be a non-empty string")

    def to_json_dict(self) -> dict:
        return {
            "text": self.text,
            "synthetic_id": self.synthetic_id,
            "unnecessary": self.unnecessary,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ResponseAction":
        try:
            return cls(
                text=data["text"],
                synthetic_id=data.get("synthetic_id"),
                unnecessary=data.get("unnecessary"),
            )
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed action JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class IocEntry:
    """An indicator of compromise extracted from incident logs."""

    kind: str
    value: str
    source_line: int

    def __post_init__(self):
        if self.kind not in IOC_KINDS:
            raise DomainError(f"unknown IoC kind {self.kind!r}")
        if not isinstance(self.value, str) or not self.value:
            raise DomainError("IoC value must be a non-empty string")
        if not isinstance(self.source_line, int) or self.source_line < 1:
            raise DomainError("source_line is 1-based and must be >= 1")

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "source_line": self.source_line}

    @classmethod
    def from_json_dict(cls, data: dict) -> "IocEntry":
        try:
            return cls(data["kind"], data["value"], data["source_line"])
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed IoC JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class EnrichmentEntry:
    """Context fetched for one IoC from the local KB or a remote service."""

    ioc: IocEntry
    source: str
    content: str
    retrieved_at: str

    def __post_init__(self):
        if self.source not in ENRICHMENT_SOURCES:
            raise DomainError(f"unknown enrichment source {self.source!r}")
        if not self.content:
            raise DomainError("enrichment content must be non-empty")

    def to_json_dict(self) -> dict:
        return {
            "ioc": self.ioc.to_json_dict(),
            "source": self.source,
            "content": self.content,
            "retrieved_at": self.retrieved_at,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "EnrichmentEntry":
        try:
            return cls(
                ioc=IocEntry.from_json_dict(data["ioc"]),
                source=data["source"],
                content=data["content"],
                retrieved_at=data["retrieved_at"],
            )
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed enrichment JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class GroundTruthAction:
    """A reference response step and the stages it completes."""

    text: str
    stage_effects: frozenset[str] = frozenset()

    def __post_init__(self):
        unknown = set(self.stage_effects) - set(STAGES)
        if unknown:
            raise DomainError(f"unknown stages in stage_effects: {sorted(unknown)}")

    def to_json_dict(self) -> dict:
        ordered = [name for name in STAGES if name in self.stage_effects]
        return {"text": self.text, "stage_effects": ordered}

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroundTruthAction":
        try:
            return cls(data["text"], frozenset(data.get("stage_effects", ())))
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed ground-truth action JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class GroundTruthPlan:
    """The reference plan for an incident.

    A well-formed reference plan completes every stage: the union of
    stage_effects across its actions covers all six. ``length`` is the
    declared reference recovery time and must equal the action count.
    """

    actions: tuple[GroundTruthAction, ...]
    length: int

    def __post_init__(self):
        if self.length != len(self.actions):
            raise DomainError(
                f"declared length {self.length} != action count {len(self.actions)}"
            )
        covered = set()
        for action in self.actions:
            covered |= action.stage_effects
        if covered != set(STAGES):
            missing = sorted(set(STAGES) - covered)
            raise DomainError(f"reference plan does not cover stages: {missing}")

    def to_json_dict(self) -> dict:
        return {
            "actions": [a.to_json_dict() for a in self.actions],
            "length": self.length,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroundTruthPlan":
        try:
            actions = tuple(
                GroundTruthAction.from_json_dict(a) for a in data["actions"]
            )
            return cls(actions=actions, length=data["length"])
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed ground-truth plan JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class Incident:
    """An incident under response.

    ``iocs`` and ``enrichment`` start empty and are filled by the retrieval
    pipeline; ``ground_truth`` is present only for incidents with a reference
    plan. Incidents with no log lines are degenerate: there is nothing to
    plan against.
    """

    id: str
    system_description: str
    logs: tuple[str, ...] = ()
    summary: str | None = None
    iocs: tuple[IocEntry, ...] = ()
    enrichment: tuple[EnrichmentEntry, ...] = ()
    ground_truth: GroundTruthPlan | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DomainError("incident id must be a non-empty string")
        if not all(isinstance(line, str) for line in self.logs):
            raise DomainError("log lines must be strings")

    @property
    def plannable(self) -> bool:
        return len(self.logs) > 0

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "system_description": self.system_description,
            "logs": list(self.logs),
            "summary": self.summary,
            "iocs": [i.to_json_dict() for i in self.iocs],
            "enrichment": [e.to_json_dict() for e in self.enrichment],
            "ground_truth": (
                self.ground_truth.to_json_dict() if self.ground_truth else None
            ),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Incident":
        if not isinstance(data, dict):
            raise DomainError("incident JSON must be an object")
        try:
            ground_truth = data.get("ground_truth")
            return cls(
                id=data["id"],
                system_description=data.get("system_description", ""),
                logs=tuple(data.get("logs", ())),
                summary=data.get("summary"),
                iocs=tuple(
                    IocEntry.from_json_dict(i) for i in data.get("iocs", ())
                ),
                enrichment=tuple(
                    EnrichmentEntry.from_json_dict(e)
                    for e in data.get("enrichment", ())
                ),
                ground_truth=(
                    GroundTruthPlan.from_json_dict(ground_truth)
                    if ground_truth is not None
                    else None
                ),
            )
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed incident JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class CandidateEvaluation:
    """One candidate action with its estimated cost-to-recover.

    ``rollout_lengths`` holds the sampled rollout lengths in Monte-Carlo mode
    and is empty in exact-expectation mode. ``censored_count`` counts rollouts
    that hit the depth budget before reaching the terminal state.
    """

    action: ResponseAction
    q_estimate: float
    rollout_lengths: tuple[float, ...] = ()
    censored_count: int = 0

    def __post_init__(self):
        if not 0 <= self.censored_count <= len(self.rollout_lengths):
            raise DomainError("censored_count out of range")

    def to_json_dict(self) -> dict:
        return {
            "action": self.action.to_json_dict(),
            "q_estimate": self.q_estimate,
            "rollout_lengths": list(self.rollout_lengths),
            "censored_count": self.censored_count,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CandidateEvaluation":
        try:
            return cls(
                action=ResponseAction.from_json_dict(data["action"]),
                q_estimate=float(data["q_estimate"]),
                rollout_lengths=tuple(float(x) for x in data.get("rollout_lengths", ())),
                censored_count=int(data.get("censored_count", 0)),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise DomainError(f"malformed candidate evaluation JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class TrajectoryStep:
    """One executed planning step, with the candidate set it chose from."""

    time_index: int
    state_before: RecoveryState
    action: ResponseAction
    state_after: RecoveryState
    q_estimate: float
    candidates: tuple[CandidateEvaluation, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "time_index": self.time_index,
            "state_before": self.state_before.to_json_dict(),
            "action": self.action.to_json_dict(),
            "state_after": self.state_after.to_json_dict(),
            "q_estimate": self.q_estimate,
            "candidates": [c.to_json_dict() for c in self.candidates],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "TrajectoryStep":
        try:
            return cls(
                time_index=int(data["time_index"]),
                state_before=RecoveryState.from_json_dict(data["state_before"]),
                action=ResponseAction.from_json_dict(data["action"]),
                state_after=RecoveryState.from_json_dict(data["state_after"]),
                q_estimate=float(data["q_estimate"]),
                candidates=tuple(
                    CandidateEvaluation.from_json_dict(c)
                    for c in data.get("candidates", ())
                ),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise DomainError(f"malformed trajectory step JSON: {exc}") from exc


@dataclass(frozen=True, slots=True)
class PlanResult:
    """A full planning trajectory.

    Steps are indexed 0..len-1 and chain: each step starts where the previous
    one ended. ``reached_terminal`` is true iff the last state reached is
    terminal; ``truncated`` is true when the step budget ran out first. An
    in-progress session exports with both flags false.
    """

    steps: tuple[TrajectoryStep, ...]
    reached_terminal: bool
    truncated: bool
    seed: int

    def __post_init__(self):
        for t, step in enumerate(self.steps):
            if step.time_index != t:
                raise DomainError(
                    f"step {t} carries time_index {step.time_index}; must be {t}"
                )
            if t > 0 and step.state_before != self.steps[t - 1].state_after:
                raise DomainError(f"step {t} does not start where step {t - 1} ended")
        if self.steps:
            final_terminal = self.steps[-1].state_after.terminal
            if self.reached_terminal != final_terminal:
                raise DomainError(
                    "reached_terminal flag disagrees with the final state"
                )
        if self.reached_terminal and self.truncated:
            raise DomainError("a plan cannot be both terminal and truncated")

    @property
    def final_state(self) -> RecoveryState | None:
        return self.steps[-1].state_after if self.steps else None

    def to_json_dict(self) -> dict:
        return {
            "steps": [s.to_json_dict() for s in self.steps],
            "reached_terminal": self.reached_terminal,
            "truncated": self.truncated,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PlanResult":
        try:
            return cls(
                steps=tuple(
                    TrajectoryStep.from_json_dict(s) for s in data["steps"]
                ),
                reached_terminal=bool(data["reached_terminal"]),
                truncated=bool(data["truncated"]),
                seed=int(data["seed"]),
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise DomainError(f"malformed plan result JSON: {exc}") from exc
