"""Exception taxonomy for the planner engine.

Every exception raised on purpose by this package derives from IrplanError so
callers can catch one base. ModelQueryError marks failures that originate in a
response model query (network, parsing); the planner converts those into
PlanAborted with the partial trajectory attached.
"""

from __future__ import annotations


class IrplanError(Exception):
    """Base class for all engine errors."""


class DomainError(IrplanError, ValueError):
    """A value violates a domain-type contract (bad index, broken chain)."""


class ContractViolation(IrplanError):
    """An operation was invoked outside its stated precondition."""


class ConstructionError(IrplanError):
    """A generator could not produce an object satisfying its invariants."""


class SolvabilityError(IrplanError):
    """The time-to-go system has no valid solution for this chain."""


class CapabilityError(IrplanError):
    """The requested mode needs a capability this backend does not expose."""


class ConfigError(IrplanError):
    """Invalid or missing configuration, including non-retryable HTTP 4xx."""


class ModelQueryError(IrplanError):
    """Base for errors raised while querying a response model."""


class TransportError(ModelQueryError):
    """A network request failed after exhausting its retry budget."""


class PredictionParseError(ModelQueryError):
    """A state-prediction reply could not be parsed."""


class FixtureMismatchError(ModelQueryError):
    """Replay mode was asked for a prompt that the fixture does not hold."""


class PlanAborted(IrplanError):
    """Planning stopped early because a model query failed.

    The trajectory completed before the failure is attached as
    ``partial_result``.
    """

    def __init__(self, message: str, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class ScoringError(IrplanError):
    """A plan and its labels cannot be combined into a score."""


class UnknownSessionError(IrplanError):
    """No session with the requested id exists."""


class SessionStateError(IrplanError):
    """The session is not in a state that allows the requested transition."""
