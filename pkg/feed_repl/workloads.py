"""Workload generators.

* fixed read-to-write ratios (:func:`gen_ratio`)
* YCSB-style phases and phase mixes (:func:`gen_ycsb_phase`, :func:`gen_ycsb_mix`)
* reads-per-write distributions taken from deployed data feeds
  (:func:`gen_from_distribution`, :data:`ETH_PRICE_ORACLE`, :data:`BTC_RELAY`)
* multi-asset price feeds (:func:`multi_asset_feed`)

All randomness comes from ``numpy.random.default_rng(seed)``.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TextIO

import numpy as np
from scipy import stats

from .core import Key, Operation, Read, Scan, Trace, Write, key_name
from .errors import WorkloadError
from .logging_config import get_logger

logger = get_logger(__name__)

ZIPF_THETA = 0.99
MAX_SCAN_LENGTH = 10
DEFAULT_PRELOAD = 2**16


def dataset_keys(count: int, width: int = 6, prefix: str = "k") -> list[Key]:
    if count < 0:
        raise WorkloadError(f"key count must be >= 0, got {count}")
    return [key_name(i, width, prefix) for i in range(count)]


# -- fixed ratios -------------------------------------------------------------


@dataclass(frozen=True)
class RatioSpec:
    """Repeating blocks of one write followed by ``reads_per_write`` reads.

    Fractional ratios alternate block sizes so that the long-run mean is
    exact, e.g. 1.5 gives blocks of 1, 2, 1, 2, ... reads.
    """

    reads_per_write: Fraction | float | int
    total_ops: int
    key_count: int = 1
    record_words: int = 1

    def __post_init__(self) -> None:
        if self.ratio < 0:
            raise WorkloadError(f"reads_per_write must be >= 0, got {self.reads_per_write}")
        if self.total_ops < 0:
            raise WorkloadError(f"total_ops must be >= 0, got {self.total_ops}")
        if self.key_count < 1:
            raise WorkloadError(f"key_count must be >= 1, got {self.key_count}")
        if self.record_words < 1:
            raise WorkloadError(f"record_words must be >= 1, got {self.record_words}")

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.reads_per_write).limit_denominator(1000)


def gen_ratio(spec: RatioSpec, seed: int = 0) -> Trace:
    """Trace of ``spec.total_ops`` operations at a fixed read-to-write ratio.

    Blocks rotate over the keys in an order fixed by ``seed``; within a
    block all operations target the same key.

    Example:
        >>> [op.code for op in gen_ratio(RatioSpec(1.5, 8))]
        ['W', 'R', 'W', 'R', 'R', 'W', 'R', 'W']
    """
    ratio = spec.ratio
    order = np.random.default_rng(seed).permutation(spec.key_count)
    keys = [key_name(int(i)) for i in order]
    trace: Trace = []
    block = 0
    while len(trace) < spec.total_ops:
        key = keys[block % spec.key_count]
        reads = math.floor((block + 1) * ratio) - math.floor(block * ratio)
        trace.append(Write(key, spec.record_words))
        trace.extend(Read(key) for _ in range(reads))
        block += 1
    return trace[: spec.total_ops]


# -- YCSB ---------------------------------------------------------------------

# workload id -> (read fraction, scan fraction, read-modify-write fraction)
YCSB_WORKLOADS: dict[str, tuple[float, float, float]] = {
    "A": (0.50, 0.0, 0.0),
    "B": (0.95, 0.0, 0.0),
    "E": (0.0, 0.95, 0.0),
    "F": (0.75, 0.0, 0.25),
}

KEY_DISTRIBUTIONS = ("uniform", "zipfian", "latest")


@dataclass(frozen=True)
class YcsbPhase:
    """One phase of a YCSB mix.

    ``op_count`` counts YCSB operations; a read-modify-write emits a read
    and a write.
    """

    workload: str
    op_count: int
    key_distribution: str = "zipfian"
    record_words: int = 1
    key_count: int = 1024
    theta: float = ZIPF_THETA

    def __post_init__(self) -> None:
        if self.workload not in YCSB_WORKLOADS:
            raise WorkloadError(
                f"unknown YCSB workload {self.workload!r}; choose from {sorted(YCSB_WORKLOADS)}"
            )
        if self.op_count < 1:
            raise WorkloadError(f"op_count must be >= 1, got {self.op_count}")
        if self.key_distribution not in KEY_DISTRIBUTIONS:
            raise WorkloadError(f"unknown key distribution {self.key_distribution!r}")
        if self.record_words < 1 or self.key_count < 1:
            raise WorkloadError("record_words and key_count must be >= 1")
        if self.theta <= 0:
            raise WorkloadError(f"theta must be > 0, got {self.theta}")


@dataclass(frozen=True)
class MixPhaseSpec:
    phases: tuple[YcsbPhase, ...]

    def __post_init__(self) -> None:
        if not self.phases:
            raise WorkloadError("a mix needs at least one phase")

    @property
    def label(self) -> str:
        return ",".join(dict.fromkeys(p.workload for p in self.phases))


def zipf_probabilities(n: int, theta: float = ZIPF_THETA) -> np.ndarray:
    """Bounded Zipf over ranks ``0..n-1``: P(i) proportional to 1/(i+1)^theta."""
    if n < 1:
        raise WorkloadError(f"n must be >= 1, got {n}")
    weights = 1.0 / np.power(np.arange(1, n + 1, dtype=float), theta)
    return weights / weights.sum()


class _KeyChooser:
    def __init__(self, phase: YcsbPhase, rng: np.random.Generator):
        self.phase = phase
        self.rng = rng
        self.latest = 0
        self.probs = (
            zipf_probabilities(phase.key_count, phase.theta)
            if phase.key_distribution != "uniform"
            else None
        )

    def read_key(self) -> int:
        n = self.phase.key_count
        if self.probs is None:
            return int(self.rng.integers(0, n))
        offset = int(self.rng.choice(n, p=self.probs))
        if self.phase.key_distribution == "latest":
            return (self.latest - offset) % n
        return offset

    def write_key(self) -> int:
        if self.phase.key_distribution == "latest":
            self.latest = (self.latest + 1) % self.phase.key_count
            return self.latest
        return self.read_key()


def gen_ycsb_phase(phase_spec: YcsbPhase, seed: int = 0) -> Trace:
    """Operations of one YCSB phase.

    A: 50% reads. B: 95% reads. E: 95% scans of 1..10 keys. F: 75% reads,
    25% read-modify-write. The remainder are writes.
    """
    rng = np.random.default_rng(seed)
    read_f, scan_f, rmw_f = YCSB_WORKLOADS[phase_spec.workload]
    chooser = _KeyChooser(phase_spec, rng)
    words = phase_spec.record_words
    draws = rng.random(phase_spec.op_count)
    trace: Trace = []
    for u in draws:
        if u < read_f:
            trace.append(Read(key_name(chooser.read_key())))
        elif u < read_f + scan_f:
            length = int(rng.integers(1, MAX_SCAN_LENGTH + 1))
            trace.append(Scan(key_name(chooser.read_key()), length))
        elif u < read_f + scan_f + rmw_f:
            key = key_name(chooser.read_key())
            trace.append(Read(key))
            trace.append(Write(key, words))
        else:
            trace.append(Write(key_name(chooser.write_key()), words))
    return trace


def gen_ycsb_mix(spec: MixPhaseSpec, seed: int = 0) -> tuple[Trace, list[tuple[str, int]]]:
    """Concatenated phases and their ``(label, op_count)`` runs."""
    trace: Trace = []
    runs: list[tuple[str, int]] = []
    for i, phase in enumerate(spec.phases):
        ops = gen_ycsb_phase(phase, seed + i)
        trace.extend(ops)
        runs.append((f"{i}:{phase.workload}", len(ops)))
    return trace, runs


# record sizes per mix: 1024-byte records for A,B and A,E; 32-byte for A,F
MIX_RECORD_WORDS = {"A,B": 32, "A,E": 32, "A,F": 1}
# mixes draw their requests from a hot set of this many preloaded records
MIX_KEY_COUNT = 64


def ycsb_mix(
    name: str,
    op_count: int = 4096,
    key_count: int = MIX_KEY_COUNT,
    record_words: int | None = None,
    key_distribution: str = "zipfian",
) -> MixPhaseSpec:
    """Four alternating phases, e.g. ``"A,E"`` gives A, E, A, E."""
    try:
        default_words = MIX_RECORD_WORDS[name]
    except KeyError:
        raise WorkloadError(
            f"unknown mix {name!r}; choose from {sorted(MIX_RECORD_WORDS)}"
        ) from None
    first, second = name.split(",")
    words = record_words or default_words
    return MixPhaseSpec(
        tuple(
            YcsbPhase(w, op_count, key_distribution, words, key_count)
            for w in (first, second, first, second)
        )
    )


# -- reads-per-write distributions --------------------------------------------


@dataclass(frozen=True)
class ReadsPerWriteDistribution:
    """Probability that a write is followed by exactly ``reads`` reads."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise WorkloadError("distribution is empty")
        reads = [r for r, _ in self.entries]
        if len(reads) != len(set(reads)):
            raise WorkloadError("duplicate reads count in distribution")
        if any(r < 0 for r in reads):
            raise WorkloadError("reads counts must be >= 0")
        if any(p < 0 for _, p in self.entries):
            raise WorkloadError("probabilities must be >= 0")
        total = sum(p for _, p in self.entries)
        if abs(total - 1.0) > 1e-9:
            raise WorkloadError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def normalized(cls, table: Mapping[int, float]) -> ReadsPerWriteDistribution:
        """Scale published percentages (which may not sum to 100) to 1."""
        total = sum(table.values())
        if total <= 0:
            raise WorkloadError("distribution has no mass")
        return cls(tuple((int(r), p / total) for r, p in sorted(table.items())))

    @classmethod
    def from_csv(cls, source: str | Path | TextIO) -> ReadsPerWriteDistribution:
        """Load ``reads,probability`` rows (with that header)."""
        if isinstance(source, (str, Path)):
            with open(source, newline="", encoding="utf-8") as fh:
                return cls.from_csv(fh)
        reader = csv.DictReader(source)
        if reader.fieldnames is None or not {"reads", "probability"} <= set(reader.fieldnames):
            raise WorkloadError("distribution CSV needs a 'reads,probability' header")
        try:
            rows = [(int(row["reads"]), float(row["probability"])) for row in reader]
        except ValueError as e:
            raise WorkloadError(f"bad distribution row: {e}") from None
        return cls(tuple(rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["reads", "probability"])
        writer.writerows(self.entries)
        return buf.getvalue()

    @property
    def reads(self) -> np.ndarray:
        return np.array([r for r, _ in self.entries], dtype=int)

    @property
    def probabilities(self) -> np.ndarray:
        p = np.array([p for _, p in self.entries], dtype=float)
        return p / p.sum()

    def mean(self) -> float:
        return float(np.dot(self.reads, self.probabilities))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.reads, size=n, p=self.probabilities)


ETH_PRICE_ORACLE = ReadsPerWriteDistribution.normalized(
    {
        0: 70.4, 1: 16.0, 2: 6.46, 3: 2.91, 4: 1.52, 5: 0.76, 6: 0.63, 7: 0.25,
        8: 0.13, 9: 0.25, 10: 0.13, 12: 0.13, 13: 0.25, 17: 0.13, 20: 0.13,
    }
)

BTC_RELAY = ReadsPerWriteDistribution.normalized(
    {0: 93.7, 1: 5.30, 2: 0.77, 3: 0.15, 4: 0.05, 5: 0.04, 6: 0.02, 7: 0.01}
)

DISTRIBUTIONS = {"ethPriceOracle": ETH_PRICE_ORACLE, "BtcRelay": BTC_RELAY}


def gen_from_distribution(
    dist: ReadsPerWriteDistribution,
    write_count: int,
    seed: int = 0,
    key: Key = "feed",
    words: int = 1,
) -> Trace:
    """``write_count`` writes, each followed by an i.i.d. number of reads."""
    if write_count < 0:
        raise WorkloadError(f"write_count must be >= 0, got {write_count}")
    rng = np.random.default_rng(seed)
    trace: Trace = []
    for reads in dist.sample(rng, write_count):
        trace.append(Write(key, words))
        trace.extend([Read(key)] * int(reads))
    return trace


def reads_per_write(trace: Iterable[Operation]) -> list[int]:
    """Reads that followed each write on its key, up to the key's next write."""
    counts: list[int] = []
    open_write: dict[Key, int] = {}
    for op in trace:
        if isinstance(op, Write):
            open_write[op.key] = len(counts)
            counts.append(0)
        elif isinstance(op, Read) and op.key in open_write:
            counts[open_write[op.key]] += 1
    return counts


def distribution_fit(trace: Iterable[Operation], dist: ReadsPerWriteDistribution) -> float:
    """Chi-square p-value of the trace's reads-per-write against ``dist``.

    Categories with fewer than 5 expected writes are pooled into one.
    """
    observed_counts = reads_per_write(trace)
    n = len(observed_counts)
    if n == 0:
        raise WorkloadError("trace has no writes")
    support = {int(r): i for i, r in enumerate(dist.reads)}
    observed = np.zeros(len(support))
    for c in observed_counts:
        if c not in support:
            return 0.0
        observed[support[c]] += 1
    expected = dist.probabilities * n
    big = expected >= 5
    obs = list(observed[big]) + ([observed[~big].sum()] if (~big).any() else [])
    exp = list(expected[big]) + ([expected[~big].sum()] if (~big).any() else [])
    if len(obs) < 2:
        return 1.0
    return float(stats.chisquare(obs, exp).pvalue)


# -- multi-asset feeds ----------------------------------------------------------


def multi_asset_feed(
    base_trace: Sequence[Operation],
    asset_count: int,
    batch_size: int,
    seed: int = 0,
    words: int | None = None,
) -> Trace:
    """Fan each base write out to ``batch_size`` distinct assets.

    A read after a batch targets one of that batch's assets.
    """
    if not asset_count >= batch_size >= 1:
        raise WorkloadError(
            f"need asset_count >= batch_size >= 1, got {asset_count}, {batch_size}"
        )
    rng = np.random.default_rng(seed)
    assets = dataset_keys(asset_count, prefix="asset")
    batch: list[Key] = []
    trace: Trace = []
    for op in base_trace:
        if isinstance(op, Write):
            picks = rng.choice(asset_count, size=batch_size, replace=False)
            batch = [assets[int(i)] for i in picks]
            trace.extend(Write(k, words or op.words) for k in batch)
        elif isinstance(op, Read):
            pool = batch or assets
            trace.append(Read(pool[int(rng.integers(0, len(pool)))]))
        else:
            raise WorkloadError("multi-asset feeds are built from writes and reads only")
    return trace


def price_feed_workload(
    write_count: int,
    seed: int = 0,
    asset_count: int = 4096,
    batch_size: int = 10,
    words: int = 1,
) -> Trace:
    """Price-oracle shape: batched multi-asset updates, reads per the oracle table."""
    base = gen_from_distribution(ETH_PRICE_ORACLE, write_count, seed, words=words)
    return multi_asset_feed(base, asset_count, batch_size, seed)


def btc_relay_workload(write_count: int, seed: int = 0, words: int = 1) -> Trace:
    """Header-relay shape: every write appends a new header key; reads hit the latest."""
    rng = np.random.default_rng(seed)
    trace: Trace = []
    for i, reads in enumerate(BTC_RELAY.sample(rng, write_count)):
        key = key_name(i, prefix="hdr")
        trace.append(Write(key, words))
        trace.extend([Read(key)] * int(reads))
    logger.debug("btc relay workload: %d writes, %d ops", write_count, len(trace))
    return trace
