"""Adversarial traces for competitiveness checks."""

from __future__ import annotations

import math

from ..core import Key, Read, Trace, Write
from ..errors import DecisionError


def worst_case_memoryless(k: int, repetitions: int, key: Key = "k", words: int = 1) -> Trace:
    """``repetitions`` blocks of one write followed by exactly ``k`` reads."""
    if k < 1:
        raise DecisionError(f"k must be >= 1, got {k}")
    if repetitions < 1:
        raise DecisionError(f"repetitions must be >= 1, got {repetitions}")
    block: Trace = [Write(key, words)] + [Read(key)] * k
    return block * repetitions


def worst_case_memorizing(
    k_prime: int, d: int, repetitions: int, key: Key = "k", words: int = 1
) -> Trace:
    """Sub-sequences of ``2D+1`` reads then ``ceil((2D+1)/K')`` writes.

    The first sub-sequence uses the same read count as the rest.
    """
    if k_prime < 1:
        raise DecisionError(f"K' must be >= 1, got {k_prime}")
    if d < 1:
        raise DecisionError(f"D must be >= 1, got {d}")
    if repetitions < 1:
        raise DecisionError(f"repetitions must be >= 1, got {repetitions}")
    reads = 2 * d + 1
    writes = math.ceil(reads / k_prime)
    block: Trace = [Read(key)] * reads + [Write(key, words)] * writes
    return block * repetitions


def eager_replication_trace(
    k: int, repetitions: int, key: Key = "k", words: int = 1
) -> Trace:
    """One write and ``k`` reads, then write/read pairs.

    A correct memoryless policy stays NR through the pairs; a policy that
    forgets to reset its read counter on writes replicates after every pair.
    """
    if repetitions < 1:
        raise DecisionError(f"repetitions must be >= 1, got {repetitions}")
    head = worst_case_memoryless(k, 1, key, words)
    return head + [Write(key, words), Read(key)] * repetitions
