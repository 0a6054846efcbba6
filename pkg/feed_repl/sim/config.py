"""Simulation configuration and policy selection."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

from ..core import Key, Operation, Write
from ..decision import (
    AdaptiveKPolicy,
    MemorizingPolicy,
    MemorylessPolicy,
    ReplicationPolicy,
    ScheduledPolicy,
    StaticPolicy,
    offline_optimal,
)
from ..errors import ConfigError
from ..gas_model import DEFAULT_SCHEDULE, GasSchedule, default_k
from .accounting import converged_d, converged_k_prime, per_record_costs, proof_depth


class PolicyKind(str, Enum):
    MEMORYLESS = "memoryless"
    MEMORIZING = "memorizing"
    ADAPTIVE_K1 = "K1"
    ADAPTIVE_K2 = "K2"
    BL1 = "BL1"
    BL2 = "BL2"
    OFFLINE = "offline"
    CONVERGED = "grub"


_ALIASES = {
    "memoryless": PolicyKind.MEMORYLESS,
    "memorizing": PolicyKind.MEMORIZING,
    "k1": PolicyKind.ADAPTIVE_K1,
    "adaptivek1": PolicyKind.ADAPTIVE_K1,
    "k2": PolicyKind.ADAPTIVE_K2,
    "adaptivek2": PolicyKind.ADAPTIVE_K2,
    "bl1": PolicyKind.BL1,
    "bl2": PolicyKind.BL2,
    "offline": PolicyKind.OFFLINE,
    "offlineoptimal": PolicyKind.OFFLINE,
    "grub": PolicyKind.CONVERGED,
    "converged": PolicyKind.CONVERGED,
}


@dataclass(frozen=True)
class PolicySpec:
    """Which replication policy a run uses, with its parameters.

    ``k`` is K for memoryless, K' for memorizing and the threshold for the
    adaptive policies; ``None`` derives it from the gas schedule. ``d`` is
    D: 1 for memorizing unless given, priced for the converged policy.
    """

    kind: PolicyKind
    k: int | None = None
    d: int | None = None
    window: int = 3

    @classmethod
    def parse(cls, text: str) -> PolicySpec:
        """Parse ``name`` or ``name:param=value,...``.

        Example:
            >>> PolicySpec.parse("memorizing:k=2,d=1").name
            "memorizing(K'=2,D=1)"
        """
        head, _, tail = text.strip().partition(":")
        kind = _ALIASES.get(head.strip().lower().replace("-", "").replace("_", ""))
        if kind is None:
            raise ConfigError(f"unknown policy {head!r}")
        params: dict[str, int] = {}
        for part in filter(None, (p.strip() for p in tail.split(","))):
            name, eq, value = part.partition("=")
            name = name.strip().lower().rstrip("'")
            if not eq or name not in ("k", "d", "window"):
                raise ConfigError(f"bad policy parameter {part!r} in {text!r}")
            try:
                params[name] = int(value)
            except ValueError:
                raise ConfigError(f"policy parameter {name} must be an integer") from None
        spec = cls(kind, **params)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.k is not None and self.k < 1:
            raise ConfigError(f"policy threshold must be >= 1, got {self.k}")
        if self.d is not None and self.d < 1:
            raise ConfigError(f"D must be >= 1, got {self.d}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")

    @property
    def name(self) -> str:
        k = "" if self.k is None else str(self.k)
        if self.kind == PolicyKind.MEMORYLESS:
            return f"memoryless(K={k or 'auto'})"
        if self.kind == PolicyKind.MEMORIZING:
            return f"memorizing(K'={k or 'auto'},D={self.d or 1})"
        if self.kind in (PolicyKind.ADAPTIVE_K1, PolicyKind.ADAPTIVE_K2):
            return f"{self.kind.value}(window={self.window})"
        return self.kind.value

    @property
    def is_baseline(self) -> bool:
        return self.kind in (PolicyKind.BL1, PolicyKind.BL2)


@dataclass(frozen=True)
class SimConfig:
    """Timing, pricing and policy of one simulation run.

    Attributes:
        epoch_len: E, ticks per epoch (one operation per tick).
        block_time: B, ticks per block.
        finality_blocks: F, blocks until a transaction is final.
        propagation_delay: Pt, ticks for a message to reach the chain.
        schedule: Gas prices.
        policy: Replication policy.
        rng_seed: Seed for every random choice in the run.
        digest_every_epoch: Send a digest transaction even for empty epochs.
        record_words: Size of records never written by the trace.
        adversary: Storage-provider behaviour, ``honest`` by default.
    """

    epoch_len: int = 60
    block_time: int = 15
    finality_blocks: int = 6
    propagation_delay: int = 1
    schedule: GasSchedule = DEFAULT_SCHEDULE
    policy: PolicySpec = field(default_factory=lambda: PolicySpec(PolicyKind.CONVERGED))
    rng_seed: int = 0
    digest_every_epoch: bool = False
    record_words: int = 1
    adversary: str = "honest"

    def __post_init__(self) -> None:
        for name in ("epoch_len", "block_time", "propagation_delay", "record_words"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.finality_blocks < 1:
            raise ConfigError(f"finality_blocks must be >= 1, got {self.finality_blocks}")
        self.policy.validate()

    @property
    def finality_lag(self) -> int:
        """Ticks from submission to finalization: Pt + B*F."""
        return self.propagation_delay + self.block_time * self.finality_blocks

    @property
    def freshness_bound(self) -> int:
        """E + Pt + B*F."""
        return self.epoch_len + self.finality_lag

    def with_policy(self, policy: PolicySpec | str) -> SimConfig:
        if isinstance(policy, str):
            policy = PolicySpec.parse(policy)
        return replace(self, policy=policy)


def writes_per_epoch(ops: Sequence[Operation], epoch_len: int) -> int:
    writes = sum(1 for op in ops if isinstance(op, Write))
    if not ops or not writes:
        return 1
    return max(1, round(epoch_len * writes / len(ops)))


def build_policy(
    config: SimConfig,
    expanded: Sequence[Operation],
    universe: Sequence[Key],
    key_words: dict[Key, int],
) -> ReplicationPolicy:
    """Instantiate the configured policy for one run.

    Args:
        config: Run configuration.
        expanded: The trace with scans expanded over ``universe``; only the
            offline policy looks at it.
        universe: Sorted key universe.
        key_words: Record size per key.
    """
    spec = config.policy
    schedule = config.schedule
    siblings = proof_depth(len(universe))
    words = max(key_words.values(), default=config.record_words)

    if spec.kind == PolicyKind.MEMORYLESS:
        return MemorylessPolicy(spec.k or default_k(schedule))
    if spec.kind == PolicyKind.MEMORIZING:
        return MemorizingPolicy(spec.k or default_k(schedule), spec.d or 1)
    if spec.kind == PolicyKind.CONVERGED:
        k_prime = spec.k or converged_k_prime(schedule, words, siblings)
        policy = MemorizingPolicy(k_prime, spec.d or converged_d(schedule, words, siblings))
        policy.name = "grub"
        return policy
    if spec.kind in (PolicyKind.ADAPTIVE_K1, PolicyKind.ADAPTIVE_K2):
        policy = AdaptiveKPolicy(
            spec.k or default_k(schedule), spec.window, spec.kind.value
        )
        policy.name = spec.name
        return policy
    if spec.kind == PolicyKind.BL1:
        return StaticPolicy("BL1")
    if spec.kind == PolicyKind.OFFLINE:
        if not expanded:
            return ScheduledPolicy([], name="offline")
        per_epoch = writes_per_epoch(expanded, config.epoch_len)
        costs = {
            k: per_record_costs(schedule, w, siblings, per_epoch, reads_per_deliver=1)
            for k, w in key_words.items()
        }
        default = per_record_costs(
            schedule, config.record_words, siblings, per_epoch, reads_per_deliver=1
        )
        result = offline_optimal(
            expanded, schedule, lambda key: costs.get(key, default), keys=universe
        )
        return ScheduledPolicy(result.decisions, name="offline")
    raise ConfigError(f"{spec.kind.value} is not an online policy")
