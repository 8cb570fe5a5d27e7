"""Deterministic random streams for planning and simulation.

A Stream is a (key, counter) pair over the splitmix64 generator in
``_kernels``. Draws advance the counter; ``child(i)`` derives a fresh,
independent stream whose key depends only on the parent key and ``i``. The
planner hands candidate ``i`` at step ``t`` the stream
``Stream(seed).child(t).child(i)``, which is why evaluation order, threading,
and process restarts cannot change the outcome of a plan.

Streams are cheap value objects and are not thread-safe; give each worker its
own child rather than sharing one.
"""

from __future__ import annotations

import numpy as np

from ._kernels import _MASK, derive_child, stream_uniform


class Stream:
    """One deterministic random stream."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, *path: int):
        key = seed & _MASK
        for index in path:
            key = derive_child(key, index)
        self.key = key
        self.counter = 0

    @classmethod
    def _from_key(cls, key: int) -> "Stream":
        stream = cls.__new__(cls)
        stream.key = key
        stream.counter = 0
        return stream

    def child(self, *path: int) -> "Stream":
        key = self.key
        for index in path:
            key = derive_child(key, index)
        return Stream._from_key(key)

    def uniform(self) -> float:
        u = stream_uniform(self.key, self.counter)
        self.counter += 1
        return u

    def choice(self, cumulative: np.ndarray) -> int:
        """Sample an index from a cumulative distribution row."""
        u = self.uniform()
        idx = int(np.searchsorted(cumulative, u, side="right"))
        last = len(cumulative) - 1
        return idx if idx <= last else last

    def child_keys(self, count: int) -> np.ndarray:
        """Keys of children 0..count-1 as uint64, for batched kernels."""
        return np.array(
            [derive_child(self.key, k) for k in range(count)], dtype=np.uint64
        )

    def __repr__(self) -> str:
        return f"Stream(key=0x{self.key:016x}, counter={self.counter})"
