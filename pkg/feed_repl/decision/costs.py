"""Per-operation cost model shared by the offline oracle and online replays.

The numbers inside :class:`OpCosts` come from the simulator's accounting
(:func:`feed_repl.sim.accounting.per_record_costs`); this module only
defines how they combine per operation.

Replica slots are invalidated rather than cleared on eviction, so only the
first replication of a key pays the insert price.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass

from ..core import Key, Operation, Read, ReplState, Write
from .base import ReplicationPolicy


@dataclass(frozen=True)
class OpCosts:
    """Gas of each decision-relevant event for one record.

    Attributes:
        read_off: Serving a read off chain through request/deliver.
        read_on: Serving a read from the on-chain replica.
        write_share: A write's share of the epoch's digest transaction.
        replica_insert: Replicating into a slot that was never used.
        replica_update: Replicating into an existing slot.
    """

    read_off: int
    read_on: int
    write_share: int
    replica_insert: int
    replica_update: int

    def replication(self, slot_exists: bool) -> int:
        return self.replica_update if slot_exists else self.replica_insert


CostLookup = Callable[[Key], OpCosts]


def as_lookup(costs: OpCosts | CostLookup) -> CostLookup:
    if isinstance(costs, OpCosts):
        return lambda _key: costs
    return costs


def step_cost(
    op: Operation, before: ReplState, after: ReplState, slot_exists: bool, costs: OpCosts
) -> int:
    """Gas for one operation given the key's state before and after it.

    A read is served in the state it finds; replication triggered by that
    read is charged on top. A write always pays its digest share, plus the
    replica write when the key is replicated after it. Eviction is free.
    """
    if isinstance(op, Read):
        gas = costs.read_on if before == ReplState.R else costs.read_off
        if before == ReplState.NR and after == ReplState.R:
            gas += costs.replication(slot_exists)
        return gas
    if isinstance(op, Write):
        gas = costs.write_share
        if after == ReplState.R:
            gas += costs.replication(slot_exists)
        return gas
    raise TypeError(f"only reads and writes are priced, got {op!r}")


def cost_of_decisions(
    trace: Iterable[Operation],
    after_states: Iterable[ReplState],
    costs: OpCosts | CostLookup,
) -> int:
    """Total gas of a trace under a given after-state per operation."""
    lookup = as_lookup(costs)
    state: dict[Key, ReplState] = {}
    slots: set[Key] = set()
    total = 0
    for op, after in zip(trace, after_states, strict=True):
        key = op.key
        before = state.get(key, ReplState.NR)
        total += step_cost(op, before, after, key in slots, lookup(key))
        state[key] = after
        if after == ReplState.R:
            slots.add(key)
    return total


def replay_policy(
    trace: Iterable[Operation], policy: ReplicationPolicy
) -> list[ReplState]:
    """Feed ``trace`` to ``policy`` and return the state after each op."""
    after: list[ReplState] = []
    for op in trace:
        policy.observe(op)
        after.append(policy.state(op.key))
    return after


def online_cost(
    trace: list[Operation], policy: ReplicationPolicy, costs: OpCosts | CostLookup
) -> int:
    return cost_of_decisions(trace, replay_policy(trace, policy), costs)


def memorizing_bound(k_prime: int, d: int, costs: OpCosts) -> float:
    """Multiplicative bound for the memorizing policy under ``costs``.

    ``(4D+2)/K'`` is exact when an off-chain read costs ``1/K'`` of a
    replica update; the second term is the same bound with the actual
    read/update price ratio.
    """
    a = 2 * d + 1
    general = a * costs.read_off / costs.replica_update + math.ceil(a / k_prime)
    return max((4 * d + 2) / k_prime, general)
