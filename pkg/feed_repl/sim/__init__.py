"""Simulator: data owner, storage provider and the storage-manager contract."""

from .accounting import (
    GasCharge,
    TxReceipt,
    converged_d,
    converged_k_prime,
    deliver_read_cost,
    per_record_costs,
    price,
    proof_depth,
    recount,
)
from .adversary import PROVIDERS, StorageProvider, make_provider
from .chain import (
    DO_SENDER,
    ChainState,
    RequestEmitted,
    RequestEvent,
    SyncHit,
    contract_deliver,
    contract_deliver_range,
    contract_direct_write,
    contract_gget,
    contract_gget_range,
    contract_update,
)
from .config import PolicyKind, PolicySpec, SimConfig, build_policy
from .engine import (
    DataOwner,
    SimEvent,
    SimResult,
    Simulation,
    do_epoch,
    run,
    run_baseline,
)
from .freshness import FreshnessEntry, check_freshness
from .ledger import LEDGER_COLUMNS, GasLedger, LedgerEntry

__all__ = [
    "DO_SENDER",
    "LEDGER_COLUMNS",
    "PROVIDERS",
    "ChainState",
    "DataOwner",
    "FreshnessEntry",
    "GasCharge",
    "GasLedger",
    "LedgerEntry",
    "PolicyKind",
    "PolicySpec",
    "RequestEmitted",
    "RequestEvent",
    "SimConfig",
    "SimEvent",
    "SimResult",
    "Simulation",
    "StorageProvider",
    "SyncHit",
    "TxReceipt",
    "build_policy",
    "check_freshness",
    "contract_deliver",
    "contract_deliver_range",
    "contract_direct_write",
    "contract_gget",
    "contract_gget_range",
    "contract_update",
    "converged_d",
    "converged_k_prime",
    "deliver_read_cost",
    "do_epoch",
    "make_provider",
    "per_record_costs",
    "price",
    "proof_depth",
    "recount",
    "run",
    "run_baseline",
]
