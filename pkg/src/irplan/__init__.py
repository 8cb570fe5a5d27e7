"""Decision-support engine for incident response.

Plans recovery actions by Monte-Carlo rollout simulation over a six-stage
recovery-state model, with a synthetic ground-truth backend for verifying the
engine's statistical guarantees and an HTTP chat backend for live use.
"""

from .domain import (
    INITIAL_STATE,
    STAGES,
    TERMINAL_STATE,
    CandidateEvaluation,
    EnrichmentEntry,
    GroundTruthAction,
    GroundTruthPlan,
    Incident,
    IocEntry,
    PlanResult,
    RecoveryState,
    ResponseAction,
    TrajectoryStep,
)
from .errors import (
    CapabilityError,
    ConfigError,
    ConstructionError,
    ContractViolation,
    DomainError,
    IrplanError,
    ModelQueryError,
    PlanAborted,
    ScoringError,
    SessionStateError,
    SolvabilityError,
    UnknownSessionError,
)
from .hallucination import (
    HallucinationEstimate,
    estimate_confidence,
    estimate_from_samples,
    hoeffding_failure_bound,
    joint_bound,
    required_epsilon,
)
from .planner import PlannerConfig, estimate_q, plan, select_action
from .response_model import (
    ResponseModel,
    SyntheticConfig,
    SyntheticModel,
    TransitionKernel,
    build_synthetic,
)
from .retrieval import KnowledgeBase, enrich, extract_iocs
from .value_analysis import (
    check_filter_condition,
    compute_delta,
    compute_eta,
    lemma1_check,
    solve_time_to_go,
)

__version__ = "1.0.0"

__all__ = [
    "INITIAL_STATE",
    "STAGES",
    "TERMINAL_STATE",
    "CandidateEvaluation",
    "CapabilityError",
    "ConfigError",
    "ConstructionError",
    "ContractViolation",
    "DomainError",
    "EnrichmentEntry",
    "GroundTruthAction",
    "GroundTruthPlan",
    "HallucinationEstimate",
    "Incident",
    "IocEntry",
    "IrplanError",
    "KnowledgeBase",
    "ModelQueryError",
    "PlanAborted",
    "PlanResult",
    "PlannerConfig",
    "RecoveryState",
    "ResponseAction",
    "ResponseModel",
    "ScoringError",
    "SessionStateError",
    "SolvabilityError",
    "SyntheticConfig",
    "SyntheticModel",
    "TrajectoryStep",
    "TransitionKernel",
    "UnknownSessionError",
    "build_synthetic",
    "check_filter_condition",
    "compute_delta",
    "compute_eta",
    "enrich",
    "estimate_confidence",
    "estimate_from_samples",
    "estimate_q",
    "extract_iocs",
    "hoeffding_failure_bound",
    "joint_bound",
    "lemma1_check",
    "plan",
    "required_epsilon",
    "select_action",
    "solve_time_to_go",
    "__version__",
]
