"""Interactive planning sessions and the operator HTTP API.

A session is an interactive plan: the engine proposes and evaluates
candidates exactly as the batch planner would, then waits for an operator
decision instead of executing the argmin itself. Accepting the top-ranked
candidate at every step therefore reproduces the batch plan for the same
seed, decision for decision. The operator may instead choose any listed
candidate or type an override action, which gets its own evaluation before
executing.

Sessions live in memory, guarded per-session; with a snapshot directory
configured every mutation is persisted as JSON and sessions are restored on
startup. Restoring is exact because all randomness is derived from (seed,
step, role): nothing about a stream needs to be saved.

The HTTP layer exposes the sessions under /api/v1 and can serve the operator
console's static build from the web root.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

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
    DomainError,
    IrplanError,
    ModelQueryError,
    SessionStateError,
    UnknownSessionError,
)
from .planner import (
    STREAM_ADVANCE,
    STREAM_OVERRIDE,
    STREAM_PROPOSE,
    PlannerConfig,
    estimate_q,
    evaluate_candidates,
    select_action,
)
from .response_model import ResponseModel
from .retrieval import KnowledgeBase, RemoteIntelClient, enrich
from .rng import Stream

STATUS_AWAITING = "awaiting_decision"
STATUS_TERMINAL = "terminal"
STATUS_TRUNCATED = "truncated"
STATUS_ERROR = "error"


@dataclass
class Session:
    """One interactive planning session."""

    id: str
    incident: Incident
    config: PlannerConfig
    current_state: RecoveryState
    steps: list[TrajectoryStep] = field(default_factory=list)
    pending_candidates: list[CandidateEvaluation] = field(default_factory=list)
    status: str = STATUS_AWAITING
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "incident": self.incident.to_json_dict(),
            "config": self.config.to_json_dict(),
            "current_state": self.current_state.to_json_dict(),
            "steps": [s.to_json_dict() for s in self.steps],
            "pending_candidates": [c.to_json_dict() for c in self.pending_candidates],
            "status": self.status,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Session":
        return cls(
            id=data["id"],
            incident=Incident.from_json_dict(data["incident"]),
            config=PlannerConfig.from_json_dict(data["config"]),
            current_state=RecoveryState.from_json_dict(data["current_state"]),
            steps=[TrajectoryStep.from_json_dict(s) for s in data["steps"]],
            pending_candidates=[
                CandidateEvaluation.from_json_dict(c)
                for c in data["pending_candidates"]
            ],
            status=data["status"],
            error=data.get("error"),
        )

    def export_plan(self) -> PlanResult:
        return PlanResult(
            steps=tuple(self.steps),
            reached_terminal=self.status == STATUS_TERMINAL,
            truncated=self.status == STATUS_TRUNCATED,
            seed=self.config.seed,
        )


@dataclass(frozen=True)
class StepDecision:
    """Operator input for one step: exactly one of the two fields."""

    candidate_index: int | None = None
    override_action_text: str | None = None

    def __post_init__(self):
        picked = (self.candidate_index is not None) + (
            self.override_action_text is not None
        )
        if picked != 1:
            raise DomainError(
                "provide exactly one of candidate_index or override_action_text"
            )
        if self.override_action_text is not None and not self.override_action_text.strip():
            raise DomainError("override action text must be non-empty")


ModelProvider = Callable[[Incident, PlannerConfig], ResponseModel]


class SessionStore:
    """In-memory session registry with optional JSON snapshots."""

    def __init__(
        self,
        model_provider: ModelProvider,
        kb: KnowledgeBase | None = None,
        remote: RemoteIntelClient | None = None,
        snapshot_dir: str | Path | None = None,
    ):
        self._model_provider = model_provider
        self._kb = kb
        self._remote = remote
        self._snapshot_dir = Path(snapshot_dir) if snapshot_dir else None
        self._sessions: dict[str, Session] = {}
        self._models: dict[str, ResponseModel] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        if self._snapshot_dir:
            self._snapshot_dir.mkdir(parents=True, exist_ok=True)
            self._restore()

    # -- snapshot handling ------------------------------------------------

    def _snapshot(self, session: Session):
        if not self._snapshot_dir:
            return
        path = self._snapshot_dir / f"{session.id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(session.to_json_dict()))
        tmp.replace(path)

    def _restore(self):
        for path in sorted(self._snapshot_dir.glob("*.json")):
            try:
                session = Session.from_json_dict(json.loads(path.read_text()))
            except (OSError, json.JSONDecodeError, IrplanError, KeyError):
                continue
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    # -- model plumbing ----------------------------------------------------

    def _model_for(self, session: Session) -> ResponseModel:
        model = self._models.get(session.id)
        if model is None:
            model = self._model_provider(session.incident, session.config)
            self._models[session.id] = model
        return model

    def _compute_candidates(self, session: Session) -> list[CandidateEvaluation]:
        model = self._model_for(session)
        observe = getattr(model, "observe_history", None)
        if observe is not None:
            observe(tuple(session.steps))
        t = len(session.steps)
        step_stream = Stream(session.config.seed).child(t)
        actions = model.propose_actions(
            session.current_state,
            session.incident,
            session.config.n_candidates,
            step_stream.child(STREAM_PROPOSE),
        )
        return evaluate_candidates(
            model,
            session.current_state,
            session.incident,
            actions,
            session.config,
            step_stream,
        )

    # -- public API ---------------------------------------------------------

    def create(self, incident: Incident, config: PlannerConfig) -> Session:
        enriched = enrich(incident, kb=self._kb, remote=self._remote)
        session = Session(
            id=uuid.uuid4().hex,
            incident=enriched,
            config=config,
            current_state=INITIAL_STATE,
        )
        if enriched.plannable:
            try:
                session.pending_candidates = self._compute_candidates(session)
                session.status = STATUS_AWAITING
            except ModelQueryError as exc:
                session.status = STATUS_ERROR
                session.error = str(exc)
        else:
            # Degenerate: nothing to plan against.
            session.status = STATUS_TERMINAL
        with self._registry_lock:
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()
        self._snapshot(session)
        return session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def list_sessions(self) -> list[Session]:
        with self._registry_lock:
            return sorted(self._sessions.values(), key=lambda s: s.id)

    def _resolve_override(self, model: ResponseModel, text: str) -> ResponseAction:
        # A synthetic backend only accepts its own action table; map matching
        # text back to the canonical action so overrides like "re-image host"
        # hit the right kernel. Free text stays free text for other backends.
        wanted = text.strip()
        for action in getattr(model, "actions", ()):
            if action.text == wanted:
                return action
        return ResponseAction(text=wanted)

    def step(self, session_id: str, decision: StepDecision) -> Session:
        session = self.get(session_id)
        lock = self._locks[session_id]
        with lock:
            if session.status != STATUS_AWAITING:
                raise SessionStateError(
                    f"session is {session.status}; no further decisions accepted"
                )
            model = self._model_for(session)
            t = len(session.steps)
            step_stream = Stream(session.config.seed).child(t)
            try:
                if decision.candidate_index is not None:
                    index = decision.candidate_index
                    if not 0 <= index < len(session.pending_candidates):
                        raise DomainError(
                            f"candidate_index {index} out of range "
                            f"[0, {len(session.pending_candidates)})"
                        )
                    chosen = session.pending_candidates[index]
                else:
                    action = self._resolve_override(
                        model, decision.override_action_text
                    )
                    chosen = estimate_q(
                        model,
                        session.current_state,
                        action,
                        session.incident,
                        session.config,
                        step_stream.child(STREAM_OVERRIDE),
                    )
                next_state = model.predict_next_state(
                    session.current_state,
                    chosen.action,
                    session.incident,
                    step_stream.child(STREAM_ADVANCE),
                )
            except ModelQueryError as exc:
                session.status = STATUS_ERROR
                session.error = str(exc)
                session.pending_candidates = []
                self._snapshot(session)
                return session
            session.steps.append(
                TrajectoryStep(
                    time_index=t,
                    state_before=session.current_state,
                    action=chosen.action,
                    state_after=next_state,
                    q_estimate=chosen.q_estimate,
                    candidates=tuple(session.pending_candidates),
                )
            )
            session.current_state = next_state
            if next_state.terminal:
                session.status = STATUS_TERMINAL
                session.pending_candidates = []
            elif len(session.steps) >= session.config.max_plan_steps:
                session.status = STATUS_TRUNCATED
                session.pending_candidates = []
            else:
                try:
                    session.pending_candidates = self._compute_candidates(session)
                except ModelQueryError as exc:
                    session.status = STATUS_ERROR
                    session.error = str(exc)
                    session.pending_candidates = []
            self._snapshot(session)
            return session

    def ranked_top_index(self, session: Session) -> int:
        return select_action(session.pending_candidates)


def synthetic_model_provider(synthetic_config=None) -> ModelProvider:
    """Default provider: a synthetic model derived from incident and seed."""
    from .response_model import SyntheticConfig, build_synthetic
    import zlib

    base = synthetic_config or SyntheticConfig()

    def provider(incident: Incident, config: PlannerConfig) -> ResponseModel:
        mixed_seed = Stream(config.seed).child(zlib.crc32(incident.id.encode())).key
        return build_synthetic(replace(base, seed=mixed_seed))

    return provider


def create_app(
    store: SessionStore | None = None,
    console_dir: str | Path | None = None,
):
    """Build the FastAPI app serving sessions under /api/v1."""
    from fastapi import FastAPI, HTTPException, Request
    from fastapi.responses import JSONResponse

    if store is None:
        store = SessionStore(synthetic_model_provider())

    app = FastAPI(title="irplan session service", version="1.0")
    app.state.store = store

    def _http_error(status: int, message: str) -> HTTPException:
        return HTTPException(status_code=status, detail=message)

    @app.exception_handler(IrplanError)
    async def _engine_error(request: Request, exc: IrplanError):
        if isinstance(exc, UnknownSessionError):
            status = 404
        elif isinstance(exc, SessionStateError):
            status = 409
        elif isinstance(exc, DomainError):
            status = 422
        else:
            status = 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(payload: dict):
        if not isinstance(payload, dict) or "incident" not in payload:
            raise _http_error(422, "payload must carry an incident object")
        incident = Incident.from_json_dict(payload["incident"])
        config_data = payload.get("config") or {}
        config = PlannerConfig.from_json_dict(config_data)
        session = store.create(incident, config)
        return session.to_json_dict()

    @app.get("/api/v1/sessions")
    def list_sessions():
        return {
            "sessions": [
                {
                    "id": s.id,
                    "incident_id": s.incident.id,
                    "status": s.status,
                    "steps": len(s.steps),
                }
                for s in store.list_sessions()
            ]
        }

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).to_json_dict()

    @app.post("/api/v1/sessions/{session_id}/step")
    def step_session(session_id: str, payload: dict):
        if not isinstance(payload, dict):
            raise _http_error(422, "step payload must be an object")
        index = payload.get("candidate_index")
        if index is not None and (isinstance(index, bool) or not isinstance(index, int)):
            raise _http_error(422, "candidate_index must be an integer")
        decision = StepDecision(
            candidate_index=index,
            override_action_text=payload.get("override_action_text"),
        )
        return store.step(session_id, decision).to_json_dict()

    @app.get("/api/v1/sessions/{session_id}/export")
    def export_session(session_id: str):
        return store.get(session_id).export_plan().to_json_dict()

    if console_dir and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(console_dir), html=True))

    return app
