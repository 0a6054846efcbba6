"""Transitions, decision deltas and the policy interface used by the simulator."""

from __future__ import annotations

import csv
import io
from abc import ABC, abstractmethod
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

from ..core import Key, Operation, Read, ReplState, Scan, Write


@dataclass(frozen=True)
class Transition:
    key: Key
    old: ReplState
    new: ReplState

    def __post_init__(self) -> None:
        if self.old == self.new:
            raise ValueError(f"transition on {self.key!r} does not change state")


@dataclass
class DecisionDelta:
    """Transitions produced by feeding one or more operations to a policy."""

    transitions: list[Transition] = field(default_factory=list)

    def add(self, key: Key, old: ReplState, new: ReplState) -> None:
        self.transitions.append(Transition(key, old, new))

    def extend(self, other: DecisionDelta) -> None:
        self.transitions.extend(other.transitions)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.transitions)

    def __len__(self) -> int:
        return len(self.transitions)

    def __bool__(self) -> bool:
        return bool(self.transitions)


def deltas_to_csv(rows: Iterable[tuple[int, Transition]]) -> str:
    """CSV ``epoch,key,old,new`` for a sequence of (epoch, transition)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "key", "old", "new"])
    for epoch, t in rows:
        writer.writerow([epoch, t.key, t.old.name, t.new.name])
    return buf.getvalue()


class ReplicationPolicy(ABC):
    """Online per-key replication policy.

    Policies are single-owner mutable objects; every key starts NR. The data
    owner shows a policy only the last write of each key per epoch unless
    ``sees_every_write`` is set.
    """

    name: str = "policy"
    sees_every_write: bool = False

    def __init__(self) -> None:
        self.states: dict[Key, ReplState] = {}

    def state(self, key: Key) -> ReplState:
        return self.states.get(key, ReplState.NR)

    def observe(self, op: Operation) -> DecisionDelta:
        """Feed one Read or Write and return the transitions it caused."""
        if isinstance(op, Scan):
            raise TypeError("scans must be expanded into reads before a policy sees them")
        if isinstance(op, Write):
            return self.on_write(op.key)
        if isinstance(op, Read):
            return self.on_read(op.key)
        raise TypeError(f"not an operation: {op!r}")

    def observe_all(self, ops: Iterable[Operation]) -> DecisionDelta:
        delta = DecisionDelta()
        for op in ops:
            delta.extend(self.observe(op))
        return delta

    def _set(self, key: Key, new: ReplState, delta: DecisionDelta) -> None:
        old = self.state(key)
        if old != new:
            delta.add(key, old, new)
        if new == ReplState.NR:
            self.states.pop(key, None)
        else:
            self.states[key] = new

    @abstractmethod
    def on_write(self, key: Key) -> DecisionDelta: ...

    @abstractmethod
    def on_read(self, key: Key) -> DecisionDelta: ...

    def describe(self) -> str:
        return self.name


class StaticPolicy(ReplicationPolicy):
    """Never changes state; with NR this is the off-chain-only baseline."""

    def __init__(self, name: str = "BL1") -> None:
        super().__init__()
        self.name = name

    def on_write(self, key: Key) -> DecisionDelta:
        return DecisionDelta()

    def on_read(self, key: Key) -> DecisionDelta:
        return DecisionDelta()
