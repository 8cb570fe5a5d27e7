"""Response-model interface and the synthetic ground-truth backend.

A response model answers two queries: propose candidate actions for a state,
and predict the state an action leads to. The synthetic backend answers both
from explicit 64x64 transition kernels, which makes every theoretical
quantity (time-to-go, prediction divergence, action labels) exactly
computable. It is the test bed for the planner's reliability guarantees.

The synthetic backend carries two kernel sets per action: ``true_kernels``
drive the actual system, ``model_kernels`` drive its own predictions. The
model kernels are a row-wise blend of the truth with a uniform distribution
over the 63 non-terminal states, controlled by ``kernel_mixing_lambda``, so
the prediction divergence is dialed in exactly.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .domain import (
    N_STATES,
    TERMINAL_INDEX,
    Incident,
    RecoveryState,
    ResponseAction,
    state_from_index,
)
from .errors import ConstructionError, ContractViolation, DomainError
from .rng import Stream

ROW_SUM_TOL = 1e-12
HALLUCINATION_TOL = 1e-9

# Minimum accepted improvement margin for non-hallucinated actions; redraw
# below this so downstream gap computations never sit on the labeling fence.
_MIN_DELTA = 1e-6
_MAX_BUILD_ATTEMPTS = 200


class ResponseModel(ABC):
    """Interface every planning backend implements."""

    exposes_exact_kernels: bool = False

    @abstractmethod
    def propose_actions(
        self, state: RecoveryState, incident: Incident, n: int, stream: Stream
    ) -> list[ResponseAction]:
        """Sample n candidate actions for a non-terminal state."""

    @abstractmethod
    def predict_next_state(
        self,
        state: RecoveryState,
        action: ResponseAction,
        incident: Incident,
        stream: Stream,
    ) -> RecoveryState:
        """Predict the state reached by applying action in state."""


@dataclass(frozen=True)
class TransitionKernel:
    """A row-stochastic transition matrix with an absorbing last state.

    By convention index ``n-1`` is the terminal state; for the 64-state
    recovery space that is canonical index 63. Rows must sum to 1 within
    1e-12 and the terminal row must be a point mass on itself.
    """

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"kernel must be square, got shape {matrix.shape}")
        if matrix.shape[0] < 2:
            raise DomainError("kernel needs at least one non-terminal state")
        if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
            raise DomainError("kernel entries must be finite and non-negative")
        row_err = np.abs(matrix.sum(axis=1) - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise DomainError(f"kernel rows must sum to 1 (max error {row_err:.3e})")
        terminal = matrix.shape[0] - 1
        off_mass = matrix[terminal].sum() - matrix[terminal, terminal]
        if off_mass > ROW_SUM_TOL or abs(matrix[terminal, terminal] - 1.0) > ROW_SUM_TOL:
            raise DomainError("terminal row must be absorbing")
        matrix = np.ascontiguousarray(matrix)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    @property
    def terminal_index(self) -> int:
        return self.matrix.shape[0] - 1

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum(self.matrix, axis=1)
        cum[:, -1] = 1.0
        return cum

    def row(self, state_index: int) -> np.ndarray:
        return self.matrix[state_index]


def identity_kernel(n_states: int = N_STATES) -> TransitionKernel:
    return TransitionKernel(np.eye(n_states))


@dataclass(frozen=True)
class SyntheticConfig:
    """Recipe for a randomized synthetic model."""

    n_actions: int = 6
    hallucinated_fraction: float = 0.25
    unnecessary_fraction: float = 0.2
    kernel_mixing_lambda: float = 0.05
    progress_bias: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if self.n_actions < 2:
            raise DomainError("synthetic models need at least 2 actions")
        for name in ("hallucinated_fraction", "unnecessary_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        # lambda = 1 would cut all model-side mass to the terminal state and
        # make the predicted time-to-go unsolvable.
        if not 0.0 <= self.kernel_mixing_lambda < 1.0:
            raise DomainError("kernel_mixing_lambda must lie in [0, 1)")
        if not 0.0 < self.progress_bias <= 1.0:
            raise DomainError("progress_bias must lie in (0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "n_actions": self.n_actions,
            "hallucinated_fraction": self.hallucinated_fraction,
            "unnecessary_fraction": self.unnecessary_fraction,
            "kernel_mixing_lambda": self.kernel_mixing_lambda,
            "progress_bias": self.progress_bias,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SyntheticConfig":
        known = {k: data[k] for k in (
            "n_actions",
            "hallucinated_fraction",
            "unnecessary_fraction",
            "kernel_mixing_lambda",
            "progress_bias",
            "seed",
        ) if k in data}
        try:
            return cls(**known)
        except TypeError as exc:
            raise DomainError(f"malformed synthetic config JSON: {exc}") from exc


# Strict bit-superset successors per state index, precomputed once. Entry s
# lists every t != s whose stage set strictly contains s's.
def _strict_supersets() -> tuple[tuple[int, ...], ...]:
    out = []
    for s in range(N_STATES):
        complement = TERMINAL_INDEX ^ s
        supersets = []
        sub = complement
        while sub:
            supersets.append(s | sub)
            sub = (sub - 1) & complement
        out.append(tuple(sorted(supersets)))
    return tuple(out)


_SUPERSETS = _strict_supersets()


class SyntheticModel(ResponseModel):
    """A fully observable model with known truth and known self-error."""

    exposes_exact_kernels = True

    def __init__(
        self,
        actions: tuple[ResponseAction, ...],
        true_kernels: tuple[TransitionKernel, ...],
        model_kernels: tuple[TransitionKernel, ...],
        proposal: np.ndarray,
        hallucinated: tuple[bool, ...],
        unnecessary: tuple[bool, ...],
        eta: float,
        seed: int,
        config: SyntheticConfig | None = None,
    ):
        n = len(actions)
        if not (len(true_kernels) == len(model_kernels) == len(hallucinated) == len(unnecessary) == n):
            raise DomainError("synthetic model arrays must agree on action count")
        proposal = np.asarray(proposal, dtype=np.float64)
        if proposal.shape != (N_STATES, n):
            raise DomainError(
                f"proposal must have shape ({N_STATES}, {n}), got {proposal.shape}"
            )
        if np.any(proposal < 0) or np.abs(proposal.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise DomainError("proposal rows must be distributions")
        if not any(not h for h in hallucinated):
            raise DomainError("at least one action must be non-hallucinated")
        self.actions = actions
        self.true_kernels = true_kernels
        self.model_kernels = model_kernels
        self.proposal = proposal
        self.hallucinated = hallucinated
        self.unnecessary = unnecessary
        self.eta = float(eta)
        self.seed = seed
        self.config = config
        self._proposal_cum = np.cumsum(proposal, axis=1)
        self._proposal_cum[:, -1] = 1.0
        self._model_cum = np.stack([k.cumulative() for k in model_kernels])
        self._true_cum = np.stack([k.cumulative() for k in true_kernels])
        self._model_stack = np.stack([k.matrix for k in model_kernels])
        self._true_stack = np.stack([k.matrix for k in true_kernels])
        self._value_cache: dict = {}

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_by_id(self, synthetic_id: int) -> ResponseAction:
        return self.actions[synthetic_id]

    def _require_non_terminal(self, state: RecoveryState, op: str):
        if state.terminal:
            raise ContractViolation(f"{op} requires a non-terminal state")

    def _action_index(self, action: ResponseAction) -> int:
        idx = action.synthetic_id
        if idx is None or not 0 <= idx < self.n_actions:
            raise DomainError(f"action {action.text!r} is not from this model")
        return idx

    def propose_actions(
        self, state: RecoveryState, incident: Incident, n: int, stream: Stream
    ) -> list[ResponseAction]:
        self._require_non_terminal(state, "propose_actions")
        if n < 1:
            raise DomainError("must request at least one candidate")
        row = self._proposal_cum[state.index]
        return [self.actions[stream.choice(row)] for _ in range(n)]

    def predict_next_state(
        self,
        state: RecoveryState,
        action: ResponseAction,
        incident: Incident,
        stream: Stream,
    ) -> RecoveryState:
        self._require_non_terminal(state, "predict_next_state")
        idx = self._action_index(action)
        nxt = stream.choice(self._model_cum[idx, state.index])
        return state_from_index(nxt)

    def sample_true_next_state(
        self, state: RecoveryState, action: ResponseAction, stream: Stream
    ) -> RecoveryState:
        """Advance the real system (not the model's belief about it)."""
        if state.terminal:
            return state
        idx = self._action_index(action)
        nxt = stream.choice(self._true_cum[idx, state.index])
        return state_from_index(nxt)

    def to_json_dict(self) -> dict:
        return {
            "actions": [a.to_json_dict() for a in self.actions],
            "true_kernels": [k.matrix.tolist() for k in self.true_kernels],
            "model_kernels": [k.matrix.tolist() for k in self.model_kernels],
            "proposal": self.proposal.tolist(),
            "hallucinated": list(self.hallucinated),
            "unnecessary": list(self.unnecessary),
            "eta": self.eta,
            "seed": self.seed,
            "config": self.config.to_json_dict() if self.config else None,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SyntheticModel":
        try:
            config = data.get("config")
            return cls(
                actions=tuple(
                    ResponseAction.from_json_dict(a) for a in data["actions"]
                ),
                true_kernels=tuple(
                    TransitionKernel(np.asarray(k)) for k in data["true_kernels"]
                ),
                model_kernels=tuple(
                    TransitionKernel(np.asarray(k)) for k in data["model_kernels"]
                ),
                proposal=np.asarray(data["proposal"]),
                hallucinated=tuple(bool(h) for h in data["hallucinated"]),
                unnecessary=tuple(bool(u) for u in data["unnecessary"]),
                eta=float(data["eta"]),
                seed=int(data["seed"]),
                config=SyntheticConfig.from_json_dict(config) if config else None,
            )
        except (TypeError, KeyError) as exc:
            raise DomainError(f"malformed synthetic model JSON: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "SyntheticModel":
        return cls.from_json_dict(json.loads(text))


def label_hallucinated(
    true_kernels: tuple[TransitionKernel, ...],
    values: "np.ndarray | object",
    tolerance: float = HALLUCINATION_TOL,
) -> tuple[bool, ...]:
    """Label each action hallucinated iff it never improves time-to-go.

    ``values`` is the solved time-to-go of the action-marginal chain (a
    ValueVector or a raw length-64 array, terminal entry 0). An action is
    hallucinated when |J(s) - sum_s' P(s'|s,a) J(s')| <= tolerance at every
    non-terminal state s.
    """
    j = np.asarray(getattr(values, "values", values), dtype=np.float64)
    flags = []
    for kernel in true_kernels:
        expected = kernel.matrix[:-1] @ j
        improvement = j[:-1] - expected
        flags.append(bool(np.max(np.abs(improvement)) <= tolerance))
    return tuple(flags)


def _progress_row(
    state: int, progress_bias: float, weight_stream_key: np.ndarray
) -> np.ndarray:
    """One transition row biased toward completing more stages.

    Mass ``progress_bias`` spreads over strict stage-superset successors with
    random weights; the rest mostly stays put, with a sliver drifting to a
    random state so regressions exist in the space.
    """
    from ._kernels import uniform_block

    supersets = _SUPERSETS[state]
    row = np.zeros(N_STATES)
    weights = uniform_block(int(weight_stream_key), 0, len(supersets) + 2) + 1e-3
    progress_weights = weights[: len(supersets)]
    progress_weights = progress_weights / progress_weights.sum()
    row[list(supersets)] = progress_bias * progress_weights
    stay_mass = (1.0 - progress_bias) * 0.8
    drift_mass = (1.0 - progress_bias) * 0.2
    row[state] += stay_mass
    drift_target = int(weights[-1] * 1e6) % (N_STATES - 1)
    row[drift_target] += drift_mass
    return row


def _build_attempt(config: SyntheticConfig, stream: Stream):
    n = config.n_actions
    n_hall = int(round(n * config.hallucinated_fraction))
    if n_hall >= n:
        raise ConstructionError(
            "hallucinated_fraction leaves no non-hallucinated action"
        )
    n_unnec = int(round(n * config.unnecessary_fraction))

    # Deterministic id shuffles from dedicated child streams.
    def pick_ids(child: Stream, count: int) -> set[int]:
        order = sorted(range(n), key=lambda i: child.child(i).uniform())
        return set(order[:count])

    hall_ids = pick_ids(stream.child(1), n_hall)
    unnec_ids = pick_ids(stream.child(2), n_unnec)

    kernels = []
    for a in range(n):
        if a in hall_ids:
            kernels.append(identity_kernel())
            continue
        matrix = np.zeros((N_STATES, N_STATES))
        action_stream = stream.child(3, a)
        for s in range(TERMINAL_INDEX):
            matrix[s] = _progress_row(
                s, config.progress_bias, action_stream.child(s).key
            )
        matrix[TERMINAL_INDEX, TERMINAL_INDEX] = 1.0
        matrix /= matrix.sum(axis=1, keepdims=True)
        kernels.append(TransitionKernel(matrix))
    return kernels, hall_ids, unnec_ids


def _mix_model_kernel(kernel: TransitionKernel, lam: float) -> TransitionKernel:
    if lam == 0.0:
        return kernel
    uniform = np.zeros((N_STATES, N_STATES))
    uniform[:TERMINAL_INDEX, :TERMINAL_INDEX] = 1.0 / (N_STATES - 1)
    uniform[TERMINAL_INDEX, TERMINAL_INDEX] = 1.0
    mixed = (1.0 - lam) * kernel.matrix + lam * uniform
    return TransitionKernel(mixed)


def build_synthetic(config: SyntheticConfig) -> SyntheticModel:
    """Build a randomized synthetic model satisfying all its invariants.

    Non-hallucinated actions are progress-biased; hallucinated ones are exact
    identity kernels, which makes their time-to-go improvement zero in every
    state no matter what the value function looks like. Candidate draws are
    rejected until every non-hallucinated action strictly improves time-to-go
    everywhere, so the improvement gap is positive on every output.
    Deterministic for a given config.
    """
    from .value_analysis import compute_delta, compute_eta, induced_chain, solve_time_to_go

    root = Stream(config.seed, 0xB0157)
    for attempt in range(_MAX_BUILD_ATTEMPTS):
        attempt_stream = root.child(attempt)
        true_kernels, hall_ids, unnec_ids = _build_attempt(config, attempt_stream)
        n = config.n_actions
        proposal = np.full((N_STATES, n), 1.0 / n)
        hallucinated = tuple(a in hall_ids for a in range(n))
        try:
            chain = induced_chain(true_kernels, proposal)
            values = solve_time_to_go(chain)
        except Exception:
            continue
        labels = label_hallucinated(true_kernels, values)
        if labels != hallucinated:
            continue
        delta = compute_delta(true_kernels, hallucinated, values)
        if delta < _MIN_DELTA:
            continue
        lam = config.kernel_mixing_lambda
        model_kernels = tuple(_mix_model_kernel(k, lam) for k in true_kernels)
        eta = compute_eta(true_kernels, model_kernels)
        actions = tuple(
            ResponseAction(
                text=_action_text(a, a in hall_ids, a in unnec_ids),
                synthetic_id=a,
                unnecessary=a in unnec_ids,
            )
            for a in range(n)
        )
        return SyntheticModel(
            actions=actions,
            true_kernels=tuple(true_kernels),
            model_kernels=model_kernels,
            proposal=proposal,
            hallucinated=hallucinated,
            unnecessary=tuple(a in unnec_ids for a in range(n)),
            eta=eta,
            seed=config.seed,
            config=config,
        )
    raise ConstructionError(
        f"no acceptable model after {_MAX_BUILD_ATTEMPTS} attempts for {config}"
    )


def _action_text(index: int, hallucinated: bool, unnecessary: bool) -> str:
    # Text is operator-facing filler for synthetic runs; labels live in the
    # model tables, not in the text.
    verbs = (
        "isolate affected subnet",
        "capture volatile memory",
        "rotate exposed credentials",
        "block listed indicators at the egress firewall",
        "reimage compromised workstation",
        "restore service from verified backup",
        "review authentication logs",
        "disable compromised account",
    )
    return f"{verbs[index % len(verbs)]} (variant {index})"
