"""Memoryless replication: replicate after K consecutive reads, drop on write."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import Key, Operation, Read, ReplState, Scan, Write
from ..errors import DecisionError
from .base import DecisionDelta, ReplicationPolicy


@dataclass
class MemorylessState:
    """Per-key read counters and replication states.

    Invariants: ``0 <= count[key] <= k_threshold``; a key in state R has no
    counter entry.
    """

    k_threshold: int
    count: dict[Key, int] = field(default_factory=dict)
    states: dict[Key, ReplState] = field(default_factory=dict)
    reset_on_write: bool = True

    def __post_init__(self) -> None:
        if self.k_threshold < 1:
            raise DecisionError(f"K must be >= 1, got {self.k_threshold}")

    def state(self, key: Key) -> ReplState:
        return self.states.get(key, ReplState.NR)


def memoryless_step(state: MemorylessState, op: Operation) -> DecisionDelta:
    """Advance the memoryless policy by one Read or Write.

    Args:
        state: Mutable policy state, updated in place.
        op: The operation; scans must already be expanded.

    Returns:
        Transitions caused by ``op`` (at most one).
    """
    delta = DecisionDelta()
    if isinstance(op, Scan):
        raise TypeError("scans must be expanded into reads first")
    key = op.key
    current = state.state(key)

    if isinstance(op, Write):
        if current == ReplState.R:
            delta.add(key, ReplState.R, ReplState.NR)
            del state.states[key]
        if state.reset_on_write:
            state.count[key] = 0
        return delta

    if isinstance(op, Read):
        if current == ReplState.R:
            return delta
        n = min(state.count.get(key, 0) + 1, state.k_threshold)
        if n >= state.k_threshold:
            state.states[key] = ReplState.R
            delta.add(key, ReplState.NR, ReplState.R)
            if state.reset_on_write:
                state.count.pop(key, None)
            else:
                # mutation path used by the verify suite: counter survives
                state.count[key] = n
        else:
            state.count[key] = n
        return delta

    raise TypeError(f"not an operation: {op!r}")


class MemorylessPolicy(ReplicationPolicy):
    def __init__(self, k: int, reset_on_write: bool = True):
        super().__init__()
        self.memory = MemorylessState(k_threshold=k, reset_on_write=reset_on_write)
        self.states = self.memory.states
        self.name = f"memoryless(K={k})"

    def on_write(self, key: Key) -> DecisionDelta:
        return memoryless_step(self.memory, Write(key))

    def on_read(self, key: Key) -> DecisionDelta:
        return memoryless_step(self.memory, Read(key))
