"""Offline-optimal replication decisions and the exhaustive reference oracle.

Keys are independent under the per-record cost model, so the optimum is a
per-key dynamic program over three states: NR without a replica slot, NR
with an (invalidated) slot, and R.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import NamedTuple

from ..core import Key, Operation, ReplState, expand_scans, trace_keys
from ..errors import DecisionError
from ..gas_model import GasSchedule
from ..logging_config import get_logger
from .base import DecisionDelta, ReplicationPolicy
from .costs import CostLookup, OpCosts, as_lookup, step_cost

logger = get_logger(__name__)

# (replication state, replica slot exists)
_STATES: tuple[tuple[ReplState, bool], ...] = (
    (ReplState.NR, False),
    (ReplState.NR, True),
    (ReplState.R, True),
)


def _next_state(index: int, after: ReplState) -> int:
    if after == ReplState.R:
        return 2
    return 0 if index == 0 else 1


class OfflineResult(NamedTuple):
    decisions: list[ReplState]
    total: int


def _prepare(trace: Sequence[Operation], keys: Sequence[Key] | None) -> list[Operation]:
    if not trace:
        raise DecisionError("offline optimum of an empty trace is undefined")
    universe = sorted(keys) if keys is not None else sorted(trace_keys(trace))
    return expand_scans(trace, universe)


def offline_optimal(
    trace: Sequence[Operation],
    schedule: GasSchedule,
    per_record_costs: OpCosts | CostLookup,
    keys: Sequence[Key] | None = None,
) -> OfflineResult:
    """Minimum-gas replication decisions for a fully known trace.

    Args:
        trace: Operations; scans are expanded over ``keys``.
        schedule: Schedule the costs were derived from (logged only).
        per_record_costs: Cost model, as produced by the simulator's
            accounting, either shared or per key.
        keys: Key universe for scan expansion; defaults to the trace's keys.

    Returns:
        The state after each (expanded) operation and the total gas.

    Raises:
        DecisionError: if the trace is empty.
    """
    ops = _prepare(trace, keys)
    lookup = as_lookup(per_record_costs)

    by_key: dict[Key, list[int]] = {}
    for i, op in enumerate(ops):
        by_key.setdefault(op.key, []).append(i)

    decisions: list[ReplState] = [ReplState.NR] * len(ops)
    total = 0
    inf = float("inf")
    for key, positions in by_key.items():
        costs = lookup(key)
        best = [0.0, inf, inf]
        back: list[list[tuple[int, ReplState]]] = []
        for pos in positions:
            op = ops[pos]
            nxt = [inf, inf, inf]
            choice: list[tuple[int, ReplState]] = [(-1, ReplState.NR)] * 3
            for s, (before, slot) in enumerate(_STATES):
                if best[s] == inf:
                    continue
                for after in (ReplState.NR, ReplState.R):
                    t = _next_state(s, after)
                    c = best[s] + step_cost(op, before, after, slot, costs)
                    if c < nxt[t]:
                        nxt[t] = c
                        choice[t] = (s, after)
            back.append(choice)
            best = nxt
        end = min(range(3), key=lambda s: best[s])
        total += int(best[end])
        state = end
        for step in range(len(positions) - 1, -1, -1):
            prev, after = back[step][state]
            decisions[positions[step]] = after
            state = prev

    logger.debug(
        "offline optimum over %d ops, %d keys: %d gas (tx_base=%d)",
        len(ops),
        len(by_key),
        total,
        schedule.tx_base,
    )
    return OfflineResult(decisions, total)


def brute_force_optimal(
    trace: Sequence[Operation],
    per_record_costs: OpCosts | CostLookup,
    keys: Sequence[Key] | None = None,
) -> int:
    """Exhaustive minimum over all 2^m after-state assignments.

    Exponential; intended as a reference for short traces only.
    """
    ops = _prepare(trace, keys)
    lookup = as_lookup(per_record_costs)
    index = {k: i for i, k in enumerate(sorted({op.key for op in ops}))}
    costs = [lookup(k) for k in sorted(index)]
    best = [float("inf")]

    def walk(i: int, states: tuple[int, ...], acc: int) -> None:
        if i == len(ops):
            best[0] = min(best[0], acc)
            return
        op = ops[i]
        k = index[op.key]
        before, slot = _STATES[states[k]]
        for after in (ReplState.NR, ReplState.R):
            t = _next_state(states[k], after)
            c = step_cost(op, before, after, slot, costs[k])
            walk(i + 1, states[:k] + (t,) + states[k + 1 :], acc + c)

    walk(0, (0,) * len(index), 0)
    return int(best[0])


class ScheduledPolicy(ReplicationPolicy):
    """Replays precomputed after-states, one per observed operation.

    Used to run the offline optimum through the simulator: the decisions
    must come from the same expanded trace the simulator feeds in.
    """

    sees_every_write = True

    def __init__(self, decisions: Sequence[ReplState], name: str = "offline"):
        super().__init__()
        self._decisions = list(decisions)
        self._cursor = 0
        self.name = name

    def _next(self, key: Key) -> DecisionDelta:
        if self._cursor >= len(self._decisions):
            raise DecisionError("scheduled policy ran past its decision list")
        after = self._decisions[self._cursor]
        self._cursor += 1
        delta = DecisionDelta()
        self._set(key, after, delta)
        return delta

    def on_write(self, key: Key) -> DecisionDelta:
        return self._next(key)

    def on_read(self, key: Key) -> DecisionDelta:
        return self._next(key)
