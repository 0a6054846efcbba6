"""Per-epoch gas ledger."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from ..errors import SimulationError
from .accounting import GasCharge, TxReceipt

LEDGER_COLUMNS = ("epoch", "ops", "tx_gas", "storage_gas", "verify_gas", "total_gas", "per_op_gas")


@dataclass
class LedgerEntry:
    epoch: int
    ops: int = 0
    tx_gas: int = 0
    storage_gas: int = 0
    verify_gas: int = 0

    @property
    def total_gas(self) -> int:
        return self.tx_gas + self.storage_gas + self.verify_gas

    @property
    def per_op_gas(self) -> float:
        return self.total_gas / self.ops if self.ops else 0.0


@dataclass
class GasLedger:
    """Gas per epoch; a transaction counts in the epoch that caused it."""

    entries: dict[int, LedgerEntry] = field(default_factory=dict)
    phases: dict[int, str] = field(default_factory=dict)

    def entry(self, epoch: int) -> LedgerEntry:
        if epoch < 0:
            raise SimulationError(f"negative epoch {epoch}")
        if epoch not in self.entries:
            self.entries[epoch] = LedgerEntry(epoch)
        return self.entries[epoch]

    def count_op(self, epoch: int, n: int = 1) -> None:
        self.entry(epoch).ops += n

    def charge(self, epoch: int, charge: GasCharge) -> None:
        e = self.entry(epoch)
        e.tx_gas += charge.tx
        e.storage_gas += charge.storage
        e.verify_gas += charge.verify

    def add_receipts(self, receipts: list[TxReceipt]) -> None:
        for r in receipts:
            self.charge(r.epoch, r.charge)

    def ordered(self) -> list[LedgerEntry]:
        return [self.entries[e] for e in sorted(self.entries)]

    @property
    def total_gas(self) -> int:
        return sum(e.total_gas for e in self.entries.values())

    @property
    def total_ops(self) -> int:
        return sum(e.ops for e in self.entries.values())

    def per_op_gas(self, skip_epochs: int = 0) -> float:
        """Average gas per operation, ignoring the first ``skip_epochs`` epochs."""
        kept = [e for e in self.ordered() if e.epoch >= skip_epochs]
        ops = sum(e.ops for e in kept)
        return sum(e.total_gas for e in kept) / ops if ops else 0.0

    def to_csv(self, with_phase: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = list(LEDGER_COLUMNS) + (["phase"] if with_phase else [])
        writer.writerow(header)
        for e in self.ordered():
            row = [
                e.epoch,
                e.ops,
                e.tx_gas,
                e.storage_gas,
                e.verify_gas,
                e.total_gas,
                f"{e.per_op_gas:.4f}",
            ]
            if with_phase:
                row.append(self.phases.get(e.epoch, ""))
            writer.writerow(row)
        return buf.getvalue()
