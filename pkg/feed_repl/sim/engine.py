"""Discrete-event simulation of the data owner, storage provider and chain.

Time is measured in ticks and the workload issues one operation per tick.
Epoch ``e`` covers ticks ``[e*E, (e+1)*E)``; at its end the data owner runs
the replication policy over the epoch's operations, updates the storage
provider's tree and submits one ``update`` transaction. Transactions take
``Pt + B*F`` ticks to finalize and are applied in (finalization time,
submission time, sequence) order.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from ..ads import (
    Digest,
    MembershipProof,
    build,
    do_relocate_root,
    do_update_root,
)
from ..core import (
    EpochBatch,
    Key,
    Operation,
    Read,
    Record,
    ReplState,
    Scan,
    Write,
    canonical_order,
    expand_scan,
    expand_scans,
    latest_writes,
    make_value,
    scan_keys,
    trace_keys,
    value_version,
)
from ..decision import ReplicationPolicy, Transition, deltas_to_csv
from ..errors import IntegrityError, SimulationError
from ..logging_config import get_logger
from .accounting import TxReceipt
from .adversary import StorageProvider, make_provider
from .chain import (
    ChainState,
    RequestEmitted,
    RequestEvent,
    contract_deliver,
    contract_deliver_range,
    contract_direct_write,
    contract_gget,
    contract_gget_range,
    contract_update,
)
from .config import PolicyKind, SimConfig, build_policy
from .freshness import GENESIS_TIME, FreshnessEntry
from .ledger import GasLedger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str
    key: Key
    detail: str = ""


@dataclass
class SimResult:
    """Everything a run produced.

    ``freshness_log`` holds one entry per answered gGet; ``put_log`` maps a
    key to its ``(time, version)`` writes.
    """

    policy_name: str
    ledger: GasLedger
    decision_trace: list[tuple[int, Transition]] = field(default_factory=list)
    freshness_log: list[FreshnessEntry] = field(default_factory=list)
    put_log: dict[Key, list[tuple[int, int]]] = field(default_factory=dict)
    integrity_events: list[SimEvent] = field(default_factory=list)
    events: list[SimEvent] = field(default_factory=list)
    receipts: list[TxReceipt] = field(default_factory=list)
    final_root: Digest = b""
    ops: int = 0

    @property
    def total_gas(self) -> int:
        return self.ledger.total_gas

    @property
    def per_op_gas(self) -> float:
        return self.total_gas / self.ops if self.ops else 0.0

    def steady_per_op(self, warmup_fraction: float = 0.25) -> float:
        """Per-op gas after dropping the first ``warmup_fraction`` of epochs."""
        if not 0.0 <= warmup_fraction < 1.0:
            raise ValueError(f"warmup_fraction must be in [0, 1), got {warmup_fraction}")
        epochs = [e.epoch for e in self.ledger.ordered() if e.ops]
        if not epochs:
            return 0.0
        skip = int((max(epochs) + 1) * warmup_fraction)
        return self.ledger.per_op_gas(skip_epochs=skip)

    def ledger_csv(self, with_phase: bool = False) -> str:
        return self.ledger.to_csv(with_phase=with_phase)

    def decisions_csv(self) -> str:
        return deltas_to_csv(self.decision_trace)

    def events_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", "kind", "key", "detail"])
        for ev in self.events:
            writer.writerow([ev.time, ev.kind, ev.key, ev.detail])
        return buf.getvalue()


class DataOwner:
    """Trusted writer: holds its own copy of every record and the current root."""

    def __init__(
        self,
        records: dict[Key, Record],
        policy: ReplicationPolicy,
        provider: StorageProvider,
    ):
        self.records = records
        self.policy = policy
        self.provider = provider
        self.root: Digest = provider.tree.root
        self.replicated: set[Key] = {
            k for k, r in records.items() if r.state == ReplState.R
        }
        self.compactions = 0


def _apply_record(owner: DataOwner, old: Record, new: Record) -> None:
    provider = owner.provider
    key = new.key
    if new.state != old.state:
        old_proof = provider.prove(key, old.state)
        if not isinstance(old_proof, MembershipProof):
            raise IntegrityError(f"storage provider denies holding {key!r}")
        position_proof = provider.prove_absent(key, new.state)
        owner.root = do_relocate_root(
            owner.root,
            old_proof,
            position_proof,
            new,
            new.state,
            sole_record=len(owner.records) == 1,
        )
        provider.tree.apply_relocation(key, new.state, new)
    else:
        proof = provider.prove(key, old.state)
        if not isinstance(proof, MembershipProof):
            raise IntegrityError(f"storage provider denies holding {key!r}")
        owner.root = do_update_root(owner.root, proof, old, new)
        provider.tree.update_value(new)
    if provider.tree.root != owner.root:
        raise IntegrityError(
            f"storage provider root diverged after updating {key!r}: "
            f"{provider.tree.root.hex()[:16]} != {owner.root.hex()[:16]}"
        )
    owner.records[key] = new


def do_epoch(
    owner: DataOwner,
    epoch_index: int,
    pending_writes: dict[Key, Record],
    epoch_ops: Sequence[Operation],
) -> EpochBatch:
    """Close one epoch on the data owner's side.

    Runs the policy over the epoch's reads and the last write of each key
    (only that value reaches the chain), brings the storage
    provider's tree up to date (checking every step against proofs) and
    assembles the batch: latest values of keys replicated after the epoch,
    net state transitions and the new root.

    Raises:
        IntegrityError: if the storage provider's proofs or tree disagree
            with the data owner's own computation.
    """
    if owner.policy.sees_every_write:
        owner.policy.observe_all(epoch_ops)
    else:
        owner.policy.observe_all(latest_writes(epoch_ops))
    touched = {op.key for op in epoch_ops if not isinstance(op, Scan)}
    transitions: dict[Key, ReplState] = {}
    for key in sorted(touched):
        new_state = owner.policy.state(key)
        if new_state != owner.records[key].state:
            transitions[key] = new_state

    changed = sorted(set(pending_writes) | set(transitions))
    for key in changed:
        old = owner.records[key]
        latest = pending_writes.get(key, old)
        new = Record(key, latest.value_words, latest.value, transitions.get(key, old.state))
        if new != old:
            _apply_record(owner, old, new)

    for key, state in transitions.items():
        if state == ReplState.R:
            owner.replicated.add(key)
        else:
            owner.replicated.discard(key)

    if owner.provider.tree.needs_compaction():
        owner.provider.tree.compact()
        expected = build(canonical_order(owner.records.values())).root
        if owner.provider.tree.root != expected:
            raise IntegrityError("storage provider compaction produced a different root")
        owner.root = expected
        owner.compactions += 1
        logger.debug("epoch %d: compacted tree", epoch_index)

    owner.provider.remember()
    writes = [
        owner.records[k] for k in changed if owner.records[k].state == ReplState.R
    ]
    batch = EpochBatch(
        epoch_index,
        writes=writes,
        transitions=sorted(transitions.items()),
        digest=owner.root,
    )
    logger.debug(
        "epoch %d: %d writes, %d replicated values, %d transitions",
        epoch_index,
        len(pending_writes),
        len(writes),
        len(transitions),
    )
    return batch


@dataclass(order=True)
class _Pending:
    time: int
    submitted: int
    seq: int
    kind: str = field(compare=False)
    epoch: int = field(compare=False)
    payload: Any = field(compare=False)


class Simulation:
    """One deterministic run of a workload under a configuration."""

    def __init__(
        self,
        workload: Iterable[Operation],
        config: SimConfig,
        dataset: Iterable[Key] | None = None,
        phases: Sequence[tuple[str, int]] | None = None,
    ):
        self.trace = list(workload)
        self.config = config
        self.direct = config.policy.kind == PolicyKind.BL2
        self.universe = sorted(trace_keys(self.trace) | set(dataset or ()))
        self.key_words: dict[Key, int] = {}
        for op in self.trace:
            if isinstance(op, Write):
                self.key_words.setdefault(op.key, op.words)
        self.phase_of_op = _phase_labels(phases, len(self.trace))

        records = {
            k: Record(
                k,
                self.key_words.get(k, config.record_words),
                make_value(k, 0, self.key_words.get(k, config.record_words)),
                ReplState.R if self.direct else ReplState.NR,
            )
            for k in self.universe
        }
        self.chain = ChainState(config.schedule)
        self.owner: DataOwner | None = None
        if self.direct:
            self.policy_name = "BL2"
            self.chain.replicas = dict(records)
            self.chain.slots = set(records)
        else:
            tree = build(canonical_order(records.values()))
            provider = make_provider(config.adversary, tree, config.rng_seed)
            policy = build_policy(
                config,
                expand_scans(self.trace, self.universe)
                if config.policy.kind == PolicyKind.OFFLINE
                else [],
                self.universe,
                self.key_words,
            )
            self.owner = DataOwner(records, policy, provider)
            self.chain.root_hash = tree.root
            self.policy_name = policy.name

        self.versions: dict[Key, int] = {}
        self.put_times: dict[Key, dict[int, int]] = {}
        self.pending_writes: dict[Key, Record] = {}
        self.epoch_ops: list[Operation] = []
        self.queue: list[_Pending] = []
        self.seq = itertools.count()
        self.now = 0
        self.ledger = GasLedger()
        self.result = SimResult(self.policy_name, self.ledger, ops=len(self.trace))

    # -- event plumbing ---------------------------------------------------

    def _log(self, time: int, kind: str, key: Key, detail: str = "") -> SimEvent:
        ev = SimEvent(time, kind, key, detail)
        self.result.events.append(ev)
        return ev

    def _push(self, fin: int, submitted: int, kind: str, epoch: int, payload: Any) -> None:
        heapq.heappush(
            self.queue, _Pending(fin, submitted, next(self.seq), kind, epoch, payload)
        )

    def _advance(self, until: int | None) -> None:
        while self.queue and (until is None or self.queue[0].time <= until):
            item = heapq.heappop(self.queue)
            self.now = item.time
            if item.kind == "update":
                self._finalize_update(item)
            elif item.kind == "deliver":
                self._execute_deliver(item)
            elif item.kind == "direct":
                contract_direct_write(
                    self.chain, item.payload, time=item.time, epoch=item.epoch
                )
                self._log(item.time, "direct_write", item.payload.key)
            else:
                raise SimulationError(f"unknown pending transaction {item.kind!r}")

    def _callback(self, get_time: int):
        def served(key: Key, record: Record) -> None:
            version = value_version(record.value)
            put_time = self.put_times.get(key, {}).get(version, GENESIS_TIME)
            self.result.freshness_log.append(
                FreshnessEntry(key, get_time, put_time, version, self.now - get_time)
            )

        return served

    # -- chain-side transactions -------------------------------------------

    def _finalize_update(self, item: _Pending) -> None:
        batch, expected = item.payload
        contract_update(self.chain, batch, time=item.time)
        if self.owner is not None:
            self.owner.provider.forget_before(self.chain.root_hash)
        self._log(item.time, "update_final", "", f"epoch={batch.epoch_index}")
        if self.chain.replica_keys() != expected:
            raise SimulationError(
                f"replica set diverged after epoch {batch.epoch_index}: "
                f"{len(self.chain.replicas)} on chain, {len(expected)} replicated"
            )

    def _schedule_deliver(self, request: RequestEvent, epoch: int) -> None:
        cfg = self.config
        observed = request.time + cfg.propagation_delay
        submit = math.ceil(observed / cfg.block_time) * cfg.block_time
        self._push(submit + cfg.finality_lag, submit, "deliver", epoch, request)
        self._log(request.time, "request", request.key, f"id={request.request_id}")

    def _execute_deliver(self, item: _Pending) -> None:
        assert self.owner is not None
        request: RequestEvent = item.payload
        provider = self.owner.provider
        served = self._callback(request.time)
        if not request.is_range:
            answer = provider.answer_key(request.key, self.chain.root_hash)
            ok = contract_deliver(
                self.chain,
                request.key,
                answer.record,
                False,
                answer.proof,
                served,
                time=item.time,
                epoch=item.epoch,
            )
        else:
            assert request.end_key is not None
            wanted = set(request.keys)
            answer = provider.answer_range(
                request.key, request.end_key, self.chain.root_hash
            )

            def served_wanted(key: Key, record: Record) -> None:
                if key in wanted:
                    served(key, record)

            ok = contract_deliver_range(
                self.chain,
                answer.key_range,
                answer.records,
                answer.proof,
                served_wanted,
                time=item.time,
                epoch=item.epoch,
            )
            if ok:
                delivered = {r.key for r in answer.records}
                self._serve_from_replicas(
                    [k for k in request.keys if k not in delivered], item, served
                )
        if ok:
            self._log(item.time, "deliver", request.key, f"id={request.request_id}")
        else:
            ev = self._log(
                item.time, "deliver_rejected", request.key, f"provider={provider.name}"
            )
            self.result.integrity_events.append(ev)

    def _serve_from_replicas(self, keys: list[Key], item: _Pending, served) -> None:
        # requested keys that were replicated while the request was in flight
        if not keys:
            return
        records = []
        for key in keys:
            record = self.chain.replicas.get(key)
            if record is None:
                raise SimulationError(f"{key!r} neither delivered nor replicated")
            records.append(record)
        self.chain.charge(
            TxReceipt(
                "gget_hit", item.epoch, item.time, reads=[r.value_words for r in records]
            )
        )
        for record in records:
            served(record.key, record)

    # -- data-owner side ----------------------------------------------------

    def _close_epoch(self, epoch: int, time: int) -> None:
        if self.direct or self.owner is None:
            return
        had_writes = bool(self.pending_writes)
        batch = do_epoch(self.owner, epoch, self.pending_writes, self.epoch_ops)
        self.pending_writes = {}
        self.epoch_ops = []
        for key, new_state in batch.transitions:
            old = ReplState.R if new_state == ReplState.NR else ReplState.NR
            self.result.decision_trace.append((epoch, Transition(key, old, new_state)))
        if not (had_writes or batch.transitions or self.config.digest_every_epoch):
            return
        expected = set(self.owner.replicated)
        self._push(time + self.config.finality_lag, time, "update", epoch, (batch, expected))
        self._log(
            time,
            "update_submit",
            "",
            f"epoch={epoch} words={batch.payload_words} transitions={len(batch.transitions)}",
        )

    def _apply(self, t: int, op: Operation) -> None:
        epoch = t // self.config.epoch_len
        self.ledger.count_op(epoch)
        label = self.phase_of_op[t] if self.phase_of_op else None
        if label is not None:
            self.ledger.phases.setdefault(epoch, label)

        if isinstance(op, Write):
            version = self.versions.get(op.key, 0) + 1
            self.versions[op.key] = version
            self.put_times.setdefault(op.key, {})[version] = t
            self.result.put_log.setdefault(op.key, []).append((t, version))
            state = ReplState.R if self.direct else ReplState.NR
            record = Record(op.key, op.words, make_value(op.key, version, op.words), state)
            if self.direct:
                self._push(t + self.config.finality_lag, t, "direct", epoch, record)
            else:
                self.pending_writes[op.key] = record
                self.epoch_ops.append(op)
            return

        if isinstance(op, Read):
            if not self.direct:
                self.epoch_ops.append(op)
            result = contract_gget(
                self.chain, op.key, self._callback(t), time=t, epoch=epoch
            )
            if isinstance(result, RequestEmitted):
                self._schedule_deliver(self.chain.event_log[result.request_id], epoch)
            return

        if isinstance(op, Scan):
            keys = scan_keys(op, self.universe)
            if not self.direct:
                self.epoch_ops.extend(expand_scan(op, self.universe))
            _, request = contract_gget_range(
                self.chain, keys, self._callback(t), time=t, epoch=epoch
            )
            if request is not None:
                self._schedule_deliver(self.chain.event_log[request.request_id], epoch)
            return

        raise SimulationError(f"not an operation: {op!r}")

    # -- main loop ----------------------------------------------------------

    def execute(self) -> SimResult:
        E = self.config.epoch_len
        n = len(self.trace)
        logger.info(
            "simulating %d ops over %d keys with %s", n, len(self.universe), self.policy_name
        )
        for t, op in enumerate(self.trace):
            self._advance(t)
            self.now = t
            if t > 0 and t % E == 0:
                self._close_epoch(t // E - 1, t)
            self._apply(t, op)
        if n:
            end = math.ceil(n / E) * E
            self._advance(end)
            self.now = end
            self._close_epoch(end // E - 1, end)
        self._advance(None)

        self.ledger.add_receipts(self.chain.receipts)
        self.result.receipts = list(self.chain.receipts)
        self.result.final_root = self.chain.root_hash
        if self.owner is not None and self.owner.compactions:
            self._log(self.now, "compaction", "", f"count={self.owner.compactions}")
        logger.info(
            "%s: %d gas total, %.1f per op, %d integrity events",
            self.policy_name,
            self.result.total_gas,
            self.result.per_op_gas,
            len(self.result.integrity_events),
        )
        return self.result


def _phase_labels(
    phases: Sequence[tuple[str, int]] | None, n: int
) -> list[str] | None:
    if not phases:
        return None
    labels: list[str] = []
    for label, count in phases:
        labels.extend([label] * count)
    if len(labels) != n:
        raise SimulationError(f"phases cover {len(labels)} ops, trace has {n}")
    return labels


def run(
    workload: Iterable[Operation],
    config: SimConfig,
    dataset: Iterable[Key] | None = None,
    phases: Sequence[tuple[str, int]] | None = None,
) -> SimResult:
    """Simulate ``workload`` under ``config``.

    Args:
        workload: Operations, one per tick.
        config: Timing, pricing, policy and storage-provider behaviour.
        dataset: Extra keys present at genesis (preloaded records).
        phases: ``(label, op_count)`` runs labelling the per-epoch ledger.

    Raises:
        IntegrityError: when the storage provider corrupts the data owner's
            update path.
        SimulationError: on an internal invariant violation.
    """
    return Simulation(workload, config, dataset, phases).execute()


def run_baseline(
    workload: Iterable[Operation],
    config: SimConfig,
    which: str,
    dataset: Iterable[Key] | None = None,
) -> SimResult:
    """Run BL1 (never replicate) or BL2 (always replicate, unbatched writes)."""
    if which not in ("BL1", "BL2"):
        raise ValueError(f"baseline must be BL1 or BL2, got {which!r}")
    return run(workload, config.with_policy(which), dataset)
