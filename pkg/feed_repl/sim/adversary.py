"""Storage providers: the honest one and scripted adversaries.

The provider owns the authoritative tree. It keeps the tree versions a
deliver can still be built against, keyed by root: the one pinned on chain,
every later one, and the genesis version the replaying adversaries serve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ads import (
    AdsTree,
    Digest,
    MembershipProof,
    RangeProof,
    prove_key,
    prove_range,
)
from ..core import Key, Record, ReplState
from ..errors import ConfigError, SimulationError
from ..logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class KeyAnswer:
    record: Record
    proof: MembershipProof


@dataclass(frozen=True)
class RangeAnswer:
    key_range: tuple[Key, Key]
    records: list[Record]
    proof: RangeProof


class StorageProvider:
    """Honest storage provider: serves the record and proof under ``root``."""

    name = "honest"

    def __init__(self, tree: AdsTree, seed: int = 0):
        self.tree = tree
        self.snapshots: dict[Digest, AdsTree] = {}
        self.roots: list[Digest] = []
        self.rng = np.random.default_rng(seed)
        self.remember()

    def remember(self) -> None:
        root = self.tree.root
        if root not in self.snapshots:
            self.roots.append(root)
        self.snapshots[root] = self.tree.snapshot()

    def forget_before(self, root: Digest) -> int:
        """Drop versions older than ``root``, keeping genesis. Returns how many."""
        if root not in self.snapshots:
            raise SimulationError(f"no tree version for root {root.hex()[:16]}")
        i = self.roots.index(root)
        if i <= 1:
            return 0
        stale = self.roots[1:i]
        for old in stale:
            del self.snapshots[old]
        self.roots = self.roots[:1] + self.roots[i:]
        return len(stale)

    def at(self, root: Digest) -> AdsTree:
        try:
            return self.snapshots[root]
        except KeyError:
            raise SimulationError(f"no tree version for root {root.hex()[:16]}") from None

    # DO-facing: proofs against the live tree

    def prove(self, key: Key, state: ReplState) -> MembershipProof | RangeProof:
        return prove_key(self.tree, key, state)

    def prove_absent(self, key: Key, state: ReplState) -> RangeProof:
        return prove_range(self.tree, key, key, state)

    # DU-facing: answers to request events

    def answer_key(self, key: Key, root: Digest) -> KeyAnswer:
        tree = self.at(root)
        record = tree.get(key)
        if record is None:
            raise SimulationError(f"request for unknown key {key!r}")
        proof = prove_key(tree, key, record.state)
        assert isinstance(proof, MembershipProof)
        return KeyAnswer(record, proof)

    def answer_range(self, start: Key, end: Key, root: Digest) -> RangeAnswer:
        proof = prove_range(self.at(root), start, end, ReplState.NR)
        return RangeAnswer((start, end), list(proof.records), proof)


class ForgingProvider(StorageProvider):
    """Flips one bit of every served value."""

    name = "forge"

    def _flip(self, record: Record) -> Record:
        data = bytearray(record.value)
        bit = int(self.rng.integers(0, len(data) * 8))
        data[bit // 8] ^= 1 << (bit % 8)
        return record.with_value(bytes(data))

    def answer_key(self, key: Key, root: Digest) -> KeyAnswer:
        honest = super().answer_key(key, root)
        return KeyAnswer(self._flip(honest.record), honest.proof)

    def answer_range(self, start: Key, end: Key, root: Digest) -> RangeAnswer:
        honest = super().answer_range(start, end, root)
        if not honest.records:
            return honest
        i = int(self.rng.integers(0, len(honest.records)))
        records = list(honest.records)
        records[i] = self._flip(records[i])
        return RangeAnswer(honest.key_range, records, honest.proof)


class OmittingProvider(StorageProvider):
    """Drops a record from every answer."""

    name = "omit"

    def answer_key(self, key: Key, root: Digest) -> KeyAnswer:
        # claims the key is missing by answering with its neighbour's proof
        tree = self.at(root)
        honest = super().answer_key(key, root)
        others = [r for r in tree.records() if r.key != key]
        if not others:
            return honest
        other = others[int(self.rng.integers(0, len(others)))]
        proof = prove_key(tree, other.key, other.state)
        assert isinstance(proof, MembershipProof)
        return KeyAnswer(honest.record, proof)

    def answer_range(self, start: Key, end: Key, root: Digest) -> RangeAnswer:
        honest = super().answer_range(start, end, root)
        if not honest.records:
            return honest
        i = int(self.rng.integers(0, len(honest.records)))
        kept = [r for j, r in enumerate(honest.records) if j != i]
        proof = RangeProof(
            honest.proof.state, start, end, tuple(kept), honest.proof.shape
        )
        return RangeAnswer(honest.key_range, kept, proof)


class ReplayingProvider(StorageProvider):
    """Answers with the record and proof from the oldest tree version."""

    name = "replay"

    def answer_key(self, key: Key, root: Digest) -> KeyAnswer:
        return super().answer_key(key, self.roots[0])

    def answer_range(self, start: Key, end: Key, root: Digest) -> RangeAnswer:
        return super().answer_range(start, end, self.roots[0])


class StaleProvider(StorageProvider):
    """Serves the oldest known value of a key with a current proof."""

    name = "stale"

    def _oldest(self, key: Key) -> Record | None:
        for root in self.roots:
            record = self.snapshots[root].get(key)
            if record is not None:
                return record
        return None

    def answer_key(self, key: Key, root: Digest) -> KeyAnswer:
        honest = super().answer_key(key, root)
        old = self._oldest(key)
        if old is None or old.value == honest.record.value:
            return honest
        return KeyAnswer(honest.record.with_value(old.value), honest.proof)

    def answer_range(self, start: Key, end: Key, root: Digest) -> RangeAnswer:
        honest = super().answer_range(start, end, root)
        records = []
        for r in honest.records:
            old = self._oldest(r.key)
            records.append(r if old is None else r.with_value(old.value))
        return RangeAnswer(honest.key_range, records, honest.proof)


PROVIDERS: dict[str, type[StorageProvider]] = {
    cls.name: cls
    for cls in (
        StorageProvider,
        ForgingProvider,
        OmittingProvider,
        ReplayingProvider,
        StaleProvider,
    )
}


def make_provider(name: str, tree: AdsTree, seed: int = 0) -> StorageProvider:
    try:
        cls = PROVIDERS[name]
    except KeyError:
        raise ConfigError(
            f"unknown storage provider {name!r}; choose from {sorted(PROVIDERS)}"
        ) from None
    if cls is not StorageProvider:
        logger.info("storage provider behaves as %r", name)
    return cls(tree, seed)


__all__ = [
    "ForgingProvider",
    "KeyAnswer",
    "OmittingProvider",
    "PROVIDERS",
    "RangeAnswer",
    "ReplayingProvider",
    "StaleProvider",
    "StorageProvider",
    "make_provider",
]
