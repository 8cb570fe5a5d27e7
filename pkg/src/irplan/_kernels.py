"""Counter-based random streams and batched rollout kernels.

Everything here exists in two flavors: a numba ``@njit`` implementation and a
vectorized numpy fallback. The active flavor is chosen once at import time:
numba wins when it is importable and the environment variable ``IRPLAN_NUMBA``
is not set to ``0``/``false``/``off``. Both flavors run the same splitmix64
arithmetic modulo 2**64, so their outputs are bit-identical; the test suite
asserts this, and ``benchmarks/bench_rollout.py`` compares their speed.

The RNG is deliberately stateless: the value of draw ``c`` from stream ``key``
is a pure function of ``(key, c)``. That is what makes parallel candidate
evaluation reproduce sequential evaluation exactly, and what lets a restarted
session resume mid-plan without replaying history.
"""

from __future__ import annotations

import os

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_CHILD_GAMMA = 0xD1B54A32D192ED03
# 2**-53: converts the top 53 bits of a mixed word into a double in [0, 1)
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """splitmix64 finalizer on python ints (wrapping at 64 bits)."""
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX_A) & _MASK
    z ^= z >> 27
    z = (z * _MIX_B) & _MASK
    return z ^ (z >> 31)


def derive_child(key: int, index: int) -> int:
    """Derive a statistically independent child key.

    Uses a different increment constant than the draw path so child keys do
    not collide with draw outputs of the same stream.
    """
    if index < 0:
        raise ValueError("stream child index must be non-negative")
    salt = mix64(((index + 1) * _CHILD_GAMMA) & _MASK)
    return mix64((key ^ salt) & _MASK)


def stream_uniform(key: int, counter: int) -> float:
    """Draw number ``counter`` of stream ``key`` as a double in [0, 1)."""
    z = mix64((key + (counter + 1) * _GOLDEN) & _MASK)
    return (z >> 11) * _INV_2_53


def uniform_block(key: int, start: int, count: int) -> np.ndarray:
    """Vectorized ``stream_uniform`` for counters start..start+count-1."""
    counters = np.arange(start, start + count, dtype=np.uint64)
    z = np.uint64(key) + (counters + np.uint64(1)) * np.uint64(_GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_A)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_B)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _numba_requested() -> bool:
    flag = os.environ.get("IRPLAN_NUMBA", "").strip().lower()
    if flag in {"0", "false", "off", "no"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_requested()


def _u01_np(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    z = keys + (counters + np.uint64(1)) * np.uint64(_GOLDEN)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_A)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_B)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def rollout_batch_numpy(
    kernel_cum: np.ndarray,
    proposal_cum: np.ndarray,
    start_state: int,
    first_action: int,
    depth_budget: int,
    keys: np.ndarray,
    terminal: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one rollout per key, stepping all active rollouts together.

    kernel_cum:   (actions, states, states) cumulative transition rows.
    proposal_cum: (states, actions) cumulative proposal rows.
    Returns (lengths, censored); a censored rollout reports depth_budget.

    Per rollout the draw order is: state draw, then action draw, repeating.
    The numba flavor consumes draws in the same order, so both produce
    identical output for identical keys.
    """
    m = keys.shape[0]
    n_states = kernel_cum.shape[1]
    n_actions = proposal_cum.shape[1]
    state = np.full(m, start_state, dtype=np.int64)
    action = np.full(m, first_action, dtype=np.int64)
    counter = np.zeros(m, dtype=np.uint64)
    steps = np.zeros(m, dtype=np.int64)
    lengths = np.zeros(m, dtype=np.float64)
    censored = np.zeros(m, dtype=np.uint8)
    active = np.ones(m, dtype=bool)
    while True:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        u = _u01_np(keys[idx], counter[idx])
        counter[idx] += np.uint64(1)
        rows = kernel_cum[action[idx], state[idx]]
        nxt = (rows <= u[:, None]).sum(axis=1)
        np.minimum(nxt, n_states - 1, out=nxt)
        state[idx] = nxt
        steps[idx] += 1
        reached = nxt == terminal
        out_of_budget = ~reached & (steps[idx] >= depth_budget)
        finished = reached | out_of_budget
        fin = idx[finished]
        lengths[fin] = np.where(reached[finished], steps[fin], depth_budget)
        censored[fin] = out_of_budget[finished]
        active[fin] = False
        cont = idx[~finished]
        if cont.size:
            u2 = _u01_np(keys[cont], counter[cont])
            counter[cont] += np.uint64(1)
            prows = proposal_cum[state[cont]]
            act = (prows <= u2[:, None]).sum(axis=1)
            np.minimum(act, n_actions - 1, out=act)
            action[cont] = act
    return lengths, censored


if USING_NUMBA:
    from numba import njit

    @njit(cache=True, inline="always")
    def _u01_nb(key, counter):  # pragma: no cover - exercised via wrapper
        z = key + (counter + np.uint64(1)) * np.uint64(_GOLDEN)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX_A)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX_B)
        z ^= z >> np.uint64(31)
        return np.float64(z >> np.uint64(11)) * _INV_2_53

    @njit(cache=True)
    def _rollout_batch_nb(
        kernel_cum, proposal_cum, start_state, first_action, depth_budget, keys, terminal
    ):  # pragma: no cover - exercised via wrapper
        m = keys.shape[0]
        n_states = kernel_cum.shape[1]
        n_actions = proposal_cum.shape[1]
        lengths = np.zeros(m, dtype=np.float64)
        censored = np.zeros(m, dtype=np.uint8)
        for r in range(m):
            key = keys[r]
            counter = np.uint64(0)
            s = start_state
            a = first_action
            steps = 0
            while True:
                u = _u01_nb(key, counter)
                counter += np.uint64(1)
                row = kernel_cum[a, s]
                nxt = 0
                while nxt < n_states - 1 and row[nxt] <= u:
                    nxt += 1
                s = nxt
                steps += 1
                if s == terminal:
                    lengths[r] = steps
                    break
                if steps >= depth_budget:
                    lengths[r] = depth_budget
                    censored[r] = 1
                    break
                u = _u01_nb(key, counter)
                counter += np.uint64(1)
                prow = proposal_cum[s]
                act = 0
                while act < n_actions - 1 and prow[act] <= u:
                    act += 1
                a = act
        return lengths, censored

    def rollout_batch_numba(
        kernel_cum: np.ndarray,
        proposal_cum: np.ndarray,
        start_state: int,
        first_action: int,
        depth_budget: int,
        keys: np.ndarray,
        terminal: int,
    ) -> tuple[np.ndarray, np.ndarray]:
        return _rollout_batch_nb(
            np.ascontiguousarray(kernel_cum),
            np.ascontiguousarray(proposal_cum),
            np.int64(start_state),
            np.int64(first_action),
            np.int64(depth_budget),
            np.ascontiguousarray(keys, dtype=np.uint64),
            np.int64(terminal),
        )

    rollout_batch = rollout_batch_numba
else:  # pragma: no cover - numpy-only environments
    rollout_batch_numba = None
    rollout_batch = rollout_batch_numpy
