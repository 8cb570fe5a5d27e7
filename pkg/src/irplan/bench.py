"""Wall-clock scaling of candidate evaluation.

Real backends spend their time waiting on a remote model, so candidate
evaluation scales with how many queries run at once, not with CPU. The
measurement here uses a stub model whose every prediction takes a fixed
latency and compares sequential against parallel evaluation across candidate
counts: sequential time grows linearly with N while parallel time stays near
one latency unit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import median

from .domain import (
    INITIAL_STATE,
    TERMINAL_STATE,
    Incident,
    RecoveryState,
    ResponseAction,
)
from .planner import PlannerConfig, evaluate_candidates
from .response_model import ResponseModel
from .rng import Stream


class FixedLatencyModel(ResponseModel):
    """Stub backend: proposals are free, each prediction sleeps.

    Predictions always land on the terminal state so one rollout costs
    exactly one query.
    """

    exposes_exact_kernels = False

    def __init__(self, latency_s: float, n_actions: int = 4):
        self.latency_s = latency_s
        self._actions = [
            ResponseAction(text=f"stub action {i}", synthetic_id=i)
            for i in range(n_actions)
        ]

    def propose_actions(self, state, incident, n, stream):
        return [self._actions[i % len(self._actions)] for i in range(n)]

    def predict_next_state(self, state, action, incident, stream) -> RecoveryState:
        time.sleep(self.latency_s)
        return TERMINAL_STATE


@dataclass(frozen=True)
class ScalingPoint:
    n_candidates: int
    mode: str
    seconds: float


def measure_scaling(
    n_values: tuple[int, ...] = (1, 2, 3, 4),
    latency_s: float = 0.05,
    repeats: int = 3,
    modes: tuple[str, ...] = ("sequential", "parallel"),
    seed: int = 0,
) -> list[ScalingPoint]:
    """Median candidate-evaluation wall time per (N, mode)."""
    model = FixedLatencyModel(latency_s)
    incident = Incident(
        id="scaling-probe",
        system_description="latency stub",
        logs=("stub log line",),
    )
    points = []
    for mode in modes:
        parallel = mode == "parallel"
        for n in n_values:
            config = PlannerConfig(
                n_candidates=n,
                m_samples=1,
                parallel_candidates=parallel,
                seed=seed,
            )
            samples = []
            for r in range(repeats):
                step_stream = Stream(seed).child(r)
                actions = model.propose_actions(INITIAL_STATE, incident, n, step_stream)
                started = time.perf_counter()
                evaluate_candidates(
                    model, INITIAL_STATE, incident, actions, config, step_stream
                )
                samples.append(time.perf_counter() - started)
            points.append(
                ScalingPoint(n_candidates=n, mode=mode, seconds=median(samples))
            )
    return points


def kernel_benchmark(
    m_rollouts: int = 50_000, seed: int = 7
) -> dict[str, float]:
    """Compare the batched rollout kernels across backends.

    Returns seconds per backend; includes only backends available in this
    process. Results are asserted identical before timing is reported.
    """
    import numpy as np

    from . import _kernels
    from .response_model import SyntheticConfig, build_synthetic

    model = build_synthetic(SyntheticConfig(n_actions=6, seed=seed))
    stream = Stream(seed, 0xBE7C4)
    keys = stream.child_keys(m_rollouts)
    args = (
        model._model_cum,
        model._proposal_cum,
        0,
        0,
        64,
        keys,
        model._model_cum.shape[1] - 1,
    )
    timings: dict[str, float] = {}
    reference = None
    backends = [("numpy", _kernels.rollout_batch_numpy)]
    if _kernels.rollout_batch_numba is not None:
        _kernels.rollout_batch_numba(*args)  # warm the JIT outside timing
        backends.append(("numba", _kernels.rollout_batch_numba))
    for name, fn in backends:
        started = time.perf_counter()
        lengths, censored = fn(*args)
        timings[name] = time.perf_counter() - started
        if reference is None:
            reference = (lengths, censored)
        else:
            if not (
                np.array_equal(reference[0], lengths)
                and np.array_equal(reference[1], censored)
            ):
                raise AssertionError("kernel backends disagree")
    return timings
