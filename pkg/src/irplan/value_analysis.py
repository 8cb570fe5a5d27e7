"""Time-to-go analysis for action-marginal recovery chains.

Marginalizing a model's per-action kernels over its action proposal gives a
single Markov chain; the expected steps-to-terminal of that chain solves the
linear system J = 1 + F J, where F is the non-terminal block. This module
solves that system directly, measures how far a model's predicted chain
drifts from the true one, and evaluates two reliability checks built on those
quantities:

- the value-gap bound: ||J_model - J_true||_inf <= eta * ||J_model||_inf *
  ||J_true||_inf, where eta is the largest row-wise total variation between
  model and true kernels; and
- the hallucination-filter condition: when the worst-case improvement gap
  delta of useful actions exceeds 2 * eta * ||J_true||_inf *
  (||J_model||_inf + 1), a planner scoring candidates by expected model
  rollout length can never prefer a do-nothing action over a useful one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, SolvabilityError
from .response_model import SyntheticModel, TransitionKernel

LEMMA_SLACK = 1e-9

# Values may undershoot 1.0 by float noise only.
_VALUE_FLOOR_TOL = 1e-9


@dataclass(frozen=True)
class ValueVector:
    """Expected steps-to-terminal per state; the terminal entry is zero."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] < 2:
            raise DomainError("value vector must be 1-D with >= 2 states")
        if values[-1] != 0.0:
            raise DomainError("terminal value must be exactly 0")
        if not np.all(np.isfinite(values)):
            raise DomainError("values must be finite")
        if np.any(values[:-1] < 1.0 - _VALUE_FLOOR_TOL):
            raise DomainError("non-terminal values must be >= 1")
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def inf_norm(self) -> float:
        return float(np.max(self.values))

    def __getitem__(self, state_index: int) -> float:
        return float(self.values[state_index])


def induced_chain(
    kernels: Sequence[TransitionKernel], proposal: np.ndarray
) -> TransitionKernel:
    """Marginalize per-action kernels over a per-state action proposal."""
    if len(kernels) == 0:
        raise DomainError("need at least one kernel")
    stack = np.stack([k.matrix for k in kernels])
    proposal = np.asarray(proposal, dtype=np.float64)
    if proposal.shape != (stack.shape[1], stack.shape[0]):
        raise DomainError(
            f"proposal shape {proposal.shape} does not match "
            f"{stack.shape[1]} states x {stack.shape[0]} actions"
        )
    mixed = np.einsum("sa,ast->st", proposal, stack)
    return TransitionKernel(mixed)


def solve_time_to_go(chain: TransitionKernel) -> ValueVector:
    """Solve J = 1 + F J on the non-terminal block by direct linear solve.

    The solve is declared failed when the system is singular or when any
    entry comes back negative or non-finite; both signal that the terminal
    state is not reachable from somewhere, so no finite expected recovery
    time exists.
    """
    non_terminal = chain.matrix[:-1, :-1]
    n = non_terminal.shape[0]
    try:
        solution = np.linalg.solve(np.eye(n) - non_terminal, np.ones(n))
    except np.linalg.LinAlgError as exc:
        raise SolvabilityError(f"time-to-go system is singular: {exc}") from exc
    if not np.all(np.isfinite(solution)) or np.any(solution < 0):
        raise SolvabilityError(
            "time-to-go solve produced negative or non-finite entries; "
            "terminal state unreachable from some state"
        )
    values = np.zeros(chain.n_states)
    values[:-1] = solution
    return ValueVector(values)


def bellman_residual(chain: TransitionKernel, values: ValueVector) -> float:
    """Max |J - (1 + F J)| over non-terminal states."""
    j = values.values
    expected = 1.0 + chain.matrix[:-1, :-1] @ j[:-1]
    return float(np.max(np.abs(j[:-1] - expected)))


def neumann_tail_norm(chain: TransitionKernel, exponent: int = 1024) -> float:
    """||F^exponent 1||_inf, a numerical proxy for spectral radius < 1.

    Computed by repeated squaring; exponent must be a power of two.
    """
    if exponent < 1 or exponent & (exponent - 1):
        raise DomainError("exponent must be a power of two")
    power = chain.matrix[:-1, :-1].copy()
    e = exponent
    while e > 1:
        power = power @ power
        e //= 2
    return float(np.max(power.sum(axis=1)))


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation as the plain L1 difference, in [0, 2]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DomainError("tv_distance needs two 1-D arrays of equal length")
    return float(np.abs(p - q).sum())


def compute_eta(
    true_kernels: Sequence[TransitionKernel],
    model_kernels: Sequence[TransitionKernel],
) -> float:
    """Worst row-wise TV between model and true kernels.

    The maximum runs over every action and every non-terminal state; the
    terminal row is pinned absorbing on both sides and carries no error.
    """
    if len(true_kernels) != len(model_kernels):
        raise DomainError("kernel lists must have equal length")
    worst = 0.0
    for true_k, model_k in zip(true_kernels, model_kernels):
        diff = np.abs(true_k.matrix[:-1] - model_k.matrix[:-1]).sum(axis=1)
        worst = max(worst, float(diff.max()))
    return worst


def compute_delta(
    true_kernels: Sequence[TransitionKernel],
    hallucinated: Sequence[bool],
    values: ValueVector,
) -> float:
    """Worst-case one-step improvement of non-hallucinated actions.

    delta = min over non-terminal s and non-hallucinated a of
    J(s) - sum_s' P(s'|s,a) J(s'), under the true kernels.
    """
    if len(true_kernels) != len(hallucinated):
        raise DomainError("kernel and label lists must have equal length")
    useful = [k for k, h in zip(true_kernels, hallucinated) if not h]
    if not useful:
        raise DomainError("delta is undefined without a non-hallucinated action")
    j = values.values
    worst = np.inf
    for kernel in useful:
        improvement = j[:-1] - kernel.matrix[:-1] @ j
        worst = min(worst, float(improvement.min()))
    return worst


@dataclass(frozen=True)
class ValueGapReport:
    """Outcome of the value-gap bound check on one model."""

    lhs: float
    rhs: float
    holds: bool
    eta: float
    j_inf_norm: float
    j_tilde_inf_norm: float

    def to_json_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "holds": self.holds,
            "eta": self.eta,
            "j_inf_norm": self.j_inf_norm,
            "j_tilde_inf_norm": self.j_tilde_inf_norm,
        }


@dataclass(frozen=True)
class FilterConditionReport:
    """Whether the hallucination-filter condition holds for a model."""

    delta: float
    eta: float
    j_inf_norm: float
    j_tilde_inf_norm: float
    rhs: float
    holds: bool

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "eta": self.eta,
            "j_inf_norm": self.j_inf_norm,
            "j_tilde_inf_norm": self.j_tilde_inf_norm,
            "rhs": self.rhs,
            "holds": self.holds,
        }


def model_value_pair(model: SyntheticModel) -> tuple[ValueVector, ValueVector]:
    """Solve true and model-predicted time-to-go under the same proposal."""
    true_chain = induced_chain(model.true_kernels, model.proposal)
    model_chain = induced_chain(model.model_kernels, model.proposal)
    return solve_time_to_go(true_chain), solve_time_to_go(model_chain)


def lemma1_check(model: SyntheticModel) -> ValueGapReport:
    """Check ||J_model - J_true||_inf <= eta ||J_model||_inf ||J_true||_inf."""
    j_true, j_model = model_value_pair(model)
    eta = compute_eta(model.true_kernels, model.model_kernels)
    lhs = float(np.max(np.abs(j_model.values - j_true.values)))
    rhs = eta * j_model.inf_norm * j_true.inf_norm
    return ValueGapReport(
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs + LEMMA_SLACK,
        eta=eta,
        j_inf_norm=j_true.inf_norm,
        j_tilde_inf_norm=j_model.inf_norm,
    )


def check_filter_condition(model: SyntheticModel) -> FilterConditionReport:
    """Evaluate delta > 2 eta ||J||_inf (||J_model||_inf + 1)."""
    j_true, j_model = model_value_pair(model)
    eta = compute_eta(model.true_kernels, model.model_kernels)
    delta = compute_delta(model.true_kernels, model.hallucinated, j_true)
    rhs = 2.0 * eta * j_true.inf_norm * (j_model.inf_norm + 1.0)
    return FilterConditionReport(
        delta=delta,
        eta=eta,
        j_inf_norm=j_true.inf_norm,
        j_tilde_inf_norm=j_model.inf_norm,
        rhs=rhs,
        holds=delta > rhs,
    )
