"""Chat-completions backend for proposals and state prediction.

The backend speaks the common chat wire shape: POST a JSON body with model,
messages, and temperature; read choices[0].message.content from the reply.
Server errors and timeouts retry with exponential backoff; 4xx replies are
configuration errors and never retry.

Prompts are built deterministically from the incident, trajectory history,
and the current recovery state; the state appears exactly once, in canonical
JSON. State replies are parsed by scanning the reply for the first JSON
object carrying all six stage flags, so leading free-form reasoning is
skipped. A reply that never parses, after the retry budget, degrades to "no
state change" with a logged warning rather than killing a long plan.

Record mode captures every (prompt, reply) pair as a JSONL fixture; replay
mode serves recorded replies byte-exactly and in recorded order for repeated
identical prompts, which is what makes planner tests hermetic. API keys live
in the environment, never in config files, and are scrubbed from anything
persisted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from pathlib import Path

import httpx

from .domain import STAGES, Incident, RecoveryState, ResponseAction, TrajectoryStep
from .errors import (
    ConfigError,
    DomainError,
    FixtureMismatchError,
    PredictionParseError,
    TransportError,
)
from .response_model import ResponseModel
from .rng import Stream

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "IRPLAN_LLM_API_KEY"

_HISTORY_WINDOW = 8
_LOG_WINDOW = 40

_THINK_RE = re.compile(r"<think>.*?</think>", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class LlmConfig:
    """Connection settings for a chat-completions endpoint."""

    endpoint_url: str
    model_name: str
    temperature: float = 0.6
    max_retries: int = 3
    timeout_s: float = 120.0
    retry_backoff_s: float = 0.5
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_in_flight: int = 4

    def __post_init__(self):
        if not self.endpoint_url:
            raise ConfigError("endpoint_url is required")
        if not self.model_name:
            raise ConfigError("model_name is required")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.timeout_s <= 0 or self.retry_backoff_s < 0:
            raise ConfigError("timeouts must be positive")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) or None

    def to_json_dict(self) -> dict:
        return {
            "endpoint_url": self.endpoint_url,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_retries": self.max_retries,
            "timeout_s": self.timeout_s,
            "retry_backoff_s": self.retry_backoff_s,
            "api_key_env": self.api_key_env,
            "max_in_flight": self.max_in_flight,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "LlmConfig":
        known = {f: data[f] for f in (
            "endpoint_url", "model_name", "temperature", "max_retries",
            "timeout_s", "retry_backoff_s", "api_key_env", "max_in_flight",
        ) if f in data}
        try:
            return cls(**known)
        except TypeError as exc:
            raise ConfigError(f"malformed llm config JSON: {exc}") from exc


def canonical_state_json(state: RecoveryState) -> str:
    """The one true textual form of a state, used in prompts and fixtures."""
    return json.dumps(state.to_json_dict(), separators=(", ", ": "))


@dataclass(frozen=True)
class PromptBundle:
    """A rendered prompt plus the metadata needed to key fixtures."""

    system: str
    user: str
    purpose: str

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": self.user},
        ]

    @property
    def text(self) -> str:
        return json.dumps(self.messages(), sort_keys=True)

    @property
    def prompt_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


_SYSTEM_PREAMBLE = (
    "You assist an incident response team. Recovery proceeds through six "
    "stages: " + ", ".join(STAGES) + ". Work from the incident evidence "
    "given; be concrete and brief."
)


def _incident_block(incident: Incident) -> str:
    lines = [f"Incident {incident.id}", f"System: {incident.system_description}"]
    if incident.summary:
        lines.append(f"Summary: {incident.summary}")
    if incident.logs:
        shown = incident.logs[:_LOG_WINDOW]
        lines.append("Log excerpt:")
        lines.extend(f"  {line}" for line in shown)
        if len(incident.logs) > len(shown):
            lines.append(f"  ... {len(incident.logs) - len(shown)} more lines")
    if incident.enrichment:
        lines.append("Indicator context:")
        for entry in incident.enrichment:
            lines.append(
                f"  [{entry.source}] {entry.ioc.kind} {entry.ioc.value}: {entry.content}"
            )
    return "\n".join(lines)


def _history_block(history: tuple[TrajectoryStep, ...]) -> str:
    if not history:
        return "No response actions taken yet."
    window = history[-_HISTORY_WINDOW:]
    lines = ["Actions taken so far:"]
    for step in window:
        lines.append(f"  {step.time_index + 1}. {step.action.text}")
    return "\n".join(lines)


def build_prompt(
    incident: Incident,
    state: RecoveryState,
    history: tuple[TrajectoryStep, ...],
    purpose: str,
    action: ResponseAction | None = None,
) -> PromptBundle:
    """Deterministically render a proposal or prediction prompt.

    The current state is embedded exactly once, in canonical JSON, for both
    purposes.
    """
    if purpose not in ("propose", "predict"):
        raise DomainError(f"unknown prompt purpose {purpose!r}")
    state_json = canonical_state_json(state)
    parts = [
        _incident_block(incident),
        _history_block(history),
        f"Current recovery state: {state_json}",
    ]
    if purpose == "propose":
        parts.append(
            "Suggest the single next response action as one short imperative "
            "sentence. Reply with the action only."
        )
    else:
        if action is None:
            raise DomainError("prediction prompts need the action under evaluation")
        parts.append(
            f"The team now executes: {action.text}\n"
            "Report the recovery state after this action as a JSON object "
            "with exactly the six boolean keys "
            + ", ".join(f'"{name}"' for name in STAGES)
            + ". Reply with the JSON object only."
        )
    return PromptBundle(
        system=_SYSTEM_PREAMBLE, user="\n\n".join(parts), purpose=purpose
    )


def _iter_json_objects(text: str):
    """Yield parsed JSON objects found in text, left to right.

    Brace-matching scan tolerant of surrounding prose and code fences; only
    balanced regions that json.loads accepts are yielded.
    """
    depth = 0
    start = None
    in_string = False
    escape = False
    for i, ch in enumerate(text):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"' and depth > 0:
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start is not None:
                candidate = text[start : i + 1]
                try:
                    parsed = json.loads(candidate)
                except json.JSONDecodeError:
                    pass
                else:
                    if isinstance(parsed, dict):
                        yield parsed
                start = None


def parse_state_reply(text: str) -> RecoveryState:
    """Extract the first complete six-flag state object from a reply.

    Objects missing any stage key are skipped (an object with five flags is
    not a state); a reply with no complete object raises.
    """
    if not isinstance(text, str):
        raise PredictionParseError("reply must be text")
    for obj in _iter_json_objects(text):
        if all(name in obj for name in STAGES):
            flags = {}
            ok = True
            for name in STAGES:
                value = obj[name]
                if isinstance(value, bool):
                    flags[name] = value
                else:
                    ok = False
                    break
            if ok:
                return RecoveryState(**flags)
    raise PredictionParseError("no complete recovery-state object in reply")


def strip_reasoning(text: str) -> str:
    """Drop fenced reasoning sections from a proposal reply."""
    return _THINK_RE.sub("", text).strip()


_RETRYABLE_STATUS = frozenset({500, 502, 503, 504})


def chat(
    config: LlmConfig,
    bundle: PromptBundle,
    client: httpx.Client | None = None,
) -> str:
    """One chat completion with retry on transient failures.

    Retries timeouts, transport failures, and 5xx statuses with exponential
    backoff; any other non-2xx status is treated as a configuration error
    and surfaces immediately.
    """
    payload = {
        "model": config.model_name,
        "messages": bundle.messages(),
        "temperature": config.temperature,
    }
    headers = {"Content-Type": "application/json"}
    api_key = config.api_key()
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=config.timeout_s)
    last_error: Exception | None = None
    try:
        for attempt in range(config.max_retries + 1):
            if attempt:
                time.sleep(config.retry_backoff_s * (2 ** (attempt - 1)))
            try:
                response = client.post(
                    config.endpoint_url, json=payload, headers=headers,
                    timeout=config.timeout_s,
                )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(
                    f"server returned {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise ConfigError(
                    f"endpoint rejected request with {response.status_code}: "
                    f"{response.text[:200]}"
                )
            try:
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from exc
        raise TransportError(
            f"chat failed after {config.max_retries + 1} attempts: {last_error}"
        )
    finally:
        if own_client:
            client.close()


class ReplayStore:
    """Recorded (prompt, reply) pairs keyed by prompt hash.

    Multiple recordings of the same prompt are replayed in recording order,
    so a step that asks the same question n times gets the same n answers
    back.
    """

    def __init__(self, records: list[dict]):
        self._queues: dict[str, deque[str]] = defaultdict(deque)
        self._lock = threading.Lock()
        for record in records:
            self._queues[record["prompt_hash"]].append(record["reply"])

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayStore":
        records = []
        try:
            with open(path) as handle:
                for line in handle:
                    line = line.strip()
                    if line:
                        records.append(json.loads(line))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load replay fixture {path}: {exc}") from exc
        return cls(records)

    def take(self, prompt_hash: str) -> str:
        with self._lock:
            queue = self._queues.get(prompt_hash)
            if not queue:
                raise FixtureMismatchError(
                    f"no recorded reply for prompt {prompt_hash[:12]}..."
                )
            return queue.popleft()


class Recorder:
    """Appends (prompt, reply) pairs to a JSONL fixture, scrubbed."""

    def __init__(self, path: str | Path, secrets: tuple[str, ...] = ()):
        self.path = Path(path)
        self._secrets = tuple(s for s in secrets if s)
        self._lock = threading.Lock()

    def scrub(self, text: str) -> str:
        for secret in self._secrets:
            text = text.replace(secret, "[redacted]")
        text = re.sub(r"Bearer\s+\S+", "Bearer [redacted]", text)
        return text

    def record(self, bundle: PromptBundle, reply: str):
        entry = {
            "prompt_hash": bundle.prompt_hash,
            "prompt": self.scrub(bundle.text),
            "reply": self.scrub(reply),
        }
        with self._lock:
            with open(self.path, "a") as handle:
                handle.write(json.dumps(entry) + "\n")


class LlmModel(ResponseModel):
    """Response model backed by a chat endpoint.

    Modes: "live" queries the endpoint; "record" queries and captures
    fixtures; "replay" serves fixtures with no network at all. Proposal
    variety comes from server-side temperature sampling, so the stream
    arguments are accepted but unused; determinism holds in replay mode.
    """

    exposes_exact_kernels = False

    def __init__(
        self,
        config: LlmConfig,
        mode: str = "live",
        fixture_path: str | Path | None = None,
        client: httpx.Client | None = None,
    ):
        if mode not in ("live", "record", "replay"):
            raise ConfigError(f"unknown llm mode {mode!r}")
        if mode in ("record", "replay") and fixture_path is None:
            raise ConfigError(f"{mode} mode needs a fixture path")
        self.config = config
        self.mode = mode
        self._client = client
        self._history: tuple[TrajectoryStep, ...] = ()
        self._in_flight = threading.Semaphore(config.max_in_flight)
        self._replay = (
            ReplayStore.from_file(fixture_path) if mode == "replay" else None
        )
        self._recorder = (
            Recorder(fixture_path, secrets=(config.api_key() or "",))
            if mode == "record"
            else None
        )

    def observe_history(self, steps: tuple[TrajectoryStep, ...]):
        """Give prompts access to the trajectory built so far."""
        self._history = tuple(steps)

    def _complete(self, bundle: PromptBundle) -> str:
        if self._replay is not None:
            return self._replay.take(bundle.prompt_hash)
        with self._in_flight:
            reply = chat(self.config, bundle, client=self._client)
        if self._recorder is not None:
            self._recorder.record(bundle, reply)
        return reply

    def propose_actions(
        self, state: RecoveryState, incident: Incident, n: int, stream: Stream
    ) -> list[ResponseAction]:
        if n < 1:
            raise DomainError("must request at least one candidate")
        bundle = build_prompt(incident, state, self._history, "propose")
        actions = []
        for _ in range(n):
            reply = self._complete(bundle)
            text = strip_reasoning(reply)
            if not text:
                text = "review incident evidence and re-plan"
            actions.append(ResponseAction(text=text))
        return actions

    def predict_next_state(
        self,
        state: RecoveryState,
        action: ResponseAction,
        incident: Incident,
        stream: Stream,
    ) -> RecoveryState:
        bundle = build_prompt(incident, state, self._history, "predict", action)
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            reply = self._complete(bundle)
            try:
                return parse_state_reply(reply)
            except PredictionParseError:
                if attempt + 1 < attempts:
                    continue
                logger.warning(
                    "state reply never parsed after %d attempts; assuming no "
                    "state change for action %r",
                    attempts, action.text,
                )
                return state
        return state  # unreachable; loop always returns
