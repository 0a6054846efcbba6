"""The modeled blockchain and the storage-manager contract.

Contract entry points mirror the on-chain interface:

* ``gGet``: replica hit returns synchronously, otherwise a request event
  is logged for the storage provider.
* ``deliver``: the storage provider answers a request with a proof that
  is checked against the pinned root.
* ``update``: the data owner pins a new root and refreshes the replicas.

Every call appends a priced :class:`~feed_repl.sim.accounting.TxReceipt`
to ``chain.receipts``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Union

from ..ads import (
    Digest,
    MembershipProof,
    RangeProof,
    verify_membership,
    verify_range,
)
from ..core import EpochBatch, Key, Record, ReplState
from ..gas_model import GasSchedule
from ..logging_config import get_logger
from .accounting import TxReceipt, price

logger = get_logger(__name__)

DO_SENDER = "DO"

Callback = Callable[[Key, Record], None]


@dataclass(frozen=True)
class RequestEvent:
    request_id: int
    time: int
    key: Key
    end_key: Key | None = None
    keys: tuple[Key, ...] = ()

    @property
    def is_range(self) -> bool:
        return self.end_key is not None


@dataclass(frozen=True)
class SyncHit:
    record: Record


@dataclass(frozen=True)
class RequestEmitted:
    request_id: int


GGetResult = Union[SyncHit, RequestEmitted]


@dataclass
class ChainState:
    """Contract storage plus the transaction log.

    Attributes:
        root_hash: Root currently pinned by the data owner.
        replicas: On-chain replica buffer, key to record.
        slots: Keys whose replica slot has ever been written; writing one
            again is an update, not an insert.
        event_log: Request events in emission order.
        receipts: Every priced contract call.
    """

    schedule: GasSchedule
    root_hash: Digest = b""
    replicas: dict[Key, Record] = field(default_factory=dict)
    slots: set[Key] = field(default_factory=set)
    event_log: list[RequestEvent] = field(default_factory=list)
    receipts: list[TxReceipt] = field(default_factory=list)
    owner: str = DO_SENDER

    def charge(self, receipt: TxReceipt) -> TxReceipt:
        receipt.charge = price(receipt, self.schedule)
        self.receipts.append(receipt)
        return receipt

    def store(self, record: Record, receipt: TxReceipt) -> None:
        if record.key in self.slots:
            receipt.updates.append(record.value_words)
        else:
            receipt.inserts.append(record.value_words)
            self.slots.add(record.key)
        self.replicas[record.key] = record

    def replica_keys(self) -> set[Key]:
        return set(self.replicas)


def contract_gget(
    chain: ChainState,
    key: Key,
    callback: Callback,
    *,
    time: int = 0,
    epoch: int = 0,
) -> GGetResult:
    """Read ``key``: serve the replica synchronously or emit a request."""
    record = chain.replicas.get(key)
    if record is not None:
        chain.charge(
            TxReceipt("gget_hit", epoch, time, reads=[record.value_words])
        )
        callback(key, record)
        return SyncHit(record)
    event = RequestEvent(len(chain.event_log), time, key)
    chain.event_log.append(event)
    return RequestEmitted(event.request_id)


def contract_gget_range(
    chain: ChainState,
    keys: list[Key],
    callback: Callback,
    *,
    time: int = 0,
    epoch: int = 0,
) -> tuple[list[Record], RequestEmitted | None]:
    """Scan ``keys`` (sorted): replicas are served now, one request covers the rest."""
    hits: list[Record] = []
    missing: list[Key] = []
    for key in keys:
        record = chain.replicas.get(key)
        if record is None:
            missing.append(key)
        else:
            hits.append(record)
    if hits:
        chain.charge(
            TxReceipt("gget_hit", epoch, time, reads=[r.value_words for r in hits])
        )
        for record in hits:
            callback(record.key, record)
    if not missing:
        return hits, None
    event = RequestEvent(
        len(chain.event_log), time, missing[0], end_key=missing[-1], keys=tuple(missing)
    )
    chain.event_log.append(event)
    return hits, RequestEmitted(event.request_id)


def contract_deliver(
    chain: ChainState,
    key: Key,
    value: Record,
    replicate_flag: bool,
    proof: MembershipProof,
    callback: Callback,
    *,
    time: int = 0,
    epoch: int = 0,
) -> bool:
    """Verify a single-record answer and pass it to the callback.

    The transaction is charged whether or not the proof holds.
    """
    receipt = TxReceipt(
        "deliver",
        epoch,
        time,
        tx_words=value.value_words + proof.words(),
        hashed_words=[value.value_words],
        node_hashes=len(proof.siblings),
    )
    ok = value.key == key and verify_membership(chain.root_hash, value, proof)
    receipt.ok = ok
    if ok and replicate_flag:
        chain.store(value.with_state(ReplState.R), receipt)
    chain.charge(receipt)
    if not ok:
        logger.debug("deliver for %r rejected at t=%d", key, time)
        return False
    callback(key, value)
    return True


def contract_deliver_range(
    chain: ChainState,
    key_range: tuple[Key, Key],
    records: list[Record],
    proof: RangeProof,
    callback: Callback,
    *,
    time: int = 0,
    epoch: int = 0,
) -> bool:
    """Verify a scan answer over the NR group of ``key_range``."""
    leaf_words, nodes = proof.hash_ops()
    receipt = TxReceipt(
        "deliver",
        epoch,
        time,
        tx_words=sum(r.value_words for r in records) + proof.words(),
        hashed_words=leaf_words,
        node_hashes=nodes,
    )
    ok = tuple(records) == tuple(proof.records) and verify_range(
        chain.root_hash, key_range, proof, ReplState.NR
    )
    receipt.ok = ok
    chain.charge(receipt)
    if not ok:
        logger.debug("range deliver %r rejected at t=%d", key_range, time)
        return False
    for record in records:
        callback(record.key, record)
    return True


def contract_update(
    chain: ChainState,
    epoch_batch: EpochBatch,
    sender: str = DO_SENDER,
    *,
    time: int = 0,
) -> bool:
    """Pin the batch digest and apply its replica writes and evictions.

    Returns False without touching state when ``sender`` is not the owner.
    """
    if sender != chain.owner:
        logger.warning("update from %r rejected; only %r may update", sender, chain.owner)
        return False
    receipt = TxReceipt(
        "update",
        epoch_batch.epoch_index,
        time,
        tx_words=epoch_batch.payload_words,
        updates=[1],
    )
    chain.root_hash = epoch_batch.digest
    for record in epoch_batch.writes:
        chain.store(record, receipt)
    for key, new_state in epoch_batch.transitions:
        if new_state == ReplState.NR:
            chain.replicas.pop(key, None)
    chain.charge(receipt)
    return True


def contract_direct_write(
    chain: ChainState, record: Record, *, time: int = 0, epoch: int = 0
) -> None:
    """Unbatched replica write, one transaction per record (always-replicate baseline)."""
    receipt = TxReceipt("direct_write", epoch, time, tx_words=record.value_words)
    chain.store(record, receipt)
    chain.charge(receipt)
