"""Gas accounting rules of the storage-manager contract.

Every charge in a run goes through :class:`TxReceipt`: the receipt carries
the itemised work (calldata words, hashed words, storage writes and reads)
and :func:`price` turns it into gas under a schedule. The ledger keeps the
priced totals; :func:`recount` re-prices the items independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..decision.costs import OpCosts
from ..gas_model import GasSchedule


@dataclass(frozen=True)
class GasCharge:
    tx: int = 0
    storage: int = 0
    verify: int = 0

    @property
    def total(self) -> int:
        return self.tx + self.storage + self.verify

    def __add__(self, other: GasCharge) -> GasCharge:
        return GasCharge(
            self.tx + other.tx, self.storage + other.storage, self.verify + other.verify
        )


@dataclass
class TxReceipt:
    """One contract invocation and the work it performed.

    ``tx_words`` is ``None`` for calls made inside another transaction (a
    replica hit in ``gGet``), which pay no transaction base.
    """

    kind: str
    epoch: int
    time: int
    tx_words: int | None = None
    hashed_words: list[int] = field(default_factory=list)
    node_hashes: int = 0
    inserts: list[int] = field(default_factory=list)
    updates: list[int] = field(default_factory=list)
    reads: list[int] = field(default_factory=list)
    ok: bool = True
    charge: GasCharge = field(default_factory=GasCharge)


def price(receipt: TxReceipt, schedule: GasSchedule) -> GasCharge:
    tx = 0 if receipt.tx_words is None else schedule.tx_cost(receipt.tx_words)
    storage = (
        sum(schedule.insert_cost(w) for w in receipt.inserts)
        + sum(schedule.update_cost(w) for w in receipt.updates)
        + sum(schedule.read_cost(w) for w in receipt.reads)
    )
    verify = sum(schedule.hash_cost(w) for w in receipt.hashed_words)
    verify += receipt.node_hashes * schedule.hash_cost(2)
    return GasCharge(tx, storage, verify)


def recount(receipts: list[TxReceipt], schedule: GasSchedule) -> int:
    """Total gas re-derived from the receipts' items, ignoring stored charges."""
    return sum(price(r, schedule).total for r in receipts)


def deliver_read_cost(
    schedule: GasSchedule, words: int = 1, proof_siblings: int = 0
) -> int:
    """Full cost of one single-record deliver, transaction base included."""
    return (
        schedule.tx_cost(words + proof_siblings)
        + schedule.hash_cost(words)
        + proof_siblings * schedule.hash_cost(2)
    )


def proof_depth(record_count: int) -> int:
    """Sibling count of a membership proof in a balanced tree."""
    return math.ceil(math.log2(record_count)) if record_count > 1 else 0


def per_record_costs(
    schedule: GasSchedule,
    words: int = 1,
    proof_siblings: int = 0,
    writes_per_epoch: int = 10,
    reads_per_deliver: int | None = None,
) -> OpCosts:
    """Decision-level costs for one record, attributed the way the ledger charges.

    An off-chain read pays the calldata and verification of its deliver
    plus ``tx_base // reads_per_deliver``; ``None`` leaves the base out,
    which is the marginal price the default thresholds are defined on.
    The simulator sends one deliver per request, so ``reads_per_deliver=1``
    reproduces its per-read charge exactly. Replica writes carry the value's
    calldata in the update transaction, and each write pays an even share of
    the epoch's digest transaction.

    Example:
        >>> per_record_costs(GasSchedule()).read_off
        2212
        >>> per_record_costs(GasSchedule(), reads_per_deliver=1).read_off
        23212
    """
    if writes_per_epoch < 1:
        raise ValueError(f"writes_per_epoch must be >= 1, got {writes_per_epoch}")
    if reads_per_deliver is not None and reads_per_deliver < 1:
        raise ValueError(f"reads_per_deliver must be >= 1, got {reads_per_deliver}")
    read_off = deliver_read_cost(schedule, words, proof_siblings) - schedule.tx_base
    if reads_per_deliver is not None:
        read_off += schedule.tx_base // reads_per_deliver
    calldata = schedule.tx_per_word * words
    digest_tx = schedule.tx_cost(1) + schedule.update_cost(1)
    return OpCosts(
        read_off=read_off,
        read_on=schedule.read_cost(words),
        write_share=digest_tx // writes_per_epoch,
        replica_insert=schedule.insert_cost(words) + calldata,
        replica_update=schedule.update_cost(words) + calldata,
    )


def converged_k_prime(
    schedule: GasSchedule, words: int = 1, proof_siblings: int = 0
) -> int:
    """K' for the converged policy: replica write over one deliver, at least 1."""
    costs = per_record_costs(schedule, words, proof_siblings, reads_per_deliver=1)
    return max(1, costs.replica_update // costs.read_off)


def converged_d(schedule: GasSchedule, words: int = 1, proof_siblings: int = 0) -> int:
    """D for the converged policy: reads that pay back a replica insert.

    Example:
        >>> converged_d(GasSchedule(), words=32, proof_siblings=16)
        6
    """
    costs = per_record_costs(schedule, words, proof_siblings, reads_per_deliver=1)
    return max(1, math.ceil(costs.replica_insert / (costs.read_off - costs.read_on)))
