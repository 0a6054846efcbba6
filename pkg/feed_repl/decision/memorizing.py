"""Memorizing replication: compare accumulated reads against weighted writes.

A key moves to R once ``w*K' + D <= r`` and back to NR once
``w*K' - D >= r``. Each condition is only checked in the state it leaves,
and the counters are re-based on every transition (``r <- D`` after going
R, ``r <- 0, w <- ceil(D/K')`` after going NR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import Key, Operation, Read, ReplState, Scan, Write
from ..errors import DecisionError
from .base import DecisionDelta, ReplicationPolicy


@dataclass
class MemorizingState:
    k_prime: int
    d_window: int
    r_count: dict[Key, int] = field(default_factory=dict)
    w_count: dict[Key, int] = field(default_factory=dict)
    states: dict[Key, ReplState] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.k_prime < 1:
            raise DecisionError(f"K' must be >= 1, got {self.k_prime}")
        if self.d_window < 1:
            raise DecisionError(f"D must be >= 1, got {self.d_window}")

    def state(self, key: Key) -> ReplState:
        return self.states.get(key, ReplState.NR)

    def counters(self, key: Key) -> tuple[int, int]:
        """(w_count, r_count) for ``key``."""
        return self.w_count.get(key, 0), self.r_count.get(key, 0)


def memorizing_step(state: MemorizingState, op: Operation) -> DecisionDelta:
    delta = DecisionDelta()
    if isinstance(op, Scan):
        raise TypeError("scans must be expanded into reads first")
    key = op.key
    if isinstance(op, Write):
        state.w_count[key] = state.w_count.get(key, 0) + 1
    elif isinstance(op, Read):
        state.r_count[key] = state.r_count.get(key, 0) + 1
    else:
        raise TypeError(f"not an operation: {op!r}")

    w, r = state.counters(key)
    kp, d = state.k_prime, state.d_window
    if state.state(key) == ReplState.NR:
        if w * kp + d <= r:
            state.states[key] = ReplState.R
            state.w_count[key] = 0
            state.r_count[key] = d
            delta.add(key, ReplState.NR, ReplState.R)
    elif w * kp - d >= r:
        del state.states[key]
        state.r_count[key] = 0
        state.w_count[key] = math.ceil(d / kp)
        delta.add(key, ReplState.R, ReplState.NR)
    return delta


class MemorizingPolicy(ReplicationPolicy):
    def __init__(self, k_prime: int, d: int = 1):
        super().__init__()
        self.memory = MemorizingState(k_prime=k_prime, d_window=d)
        self.states = self.memory.states
        self.name = f"memorizing(K'={k_prime},D={d})"

    def on_write(self, key: Key) -> DecisionDelta:
        return memorizing_step(self.memory, Write(key))

    def on_read(self, key: Key) -> DecisionDelta:
        return memorizing_step(self.memory, Read(key))
