"""Shared domain vocabulary: keys, records, operations, traces and epochs.

Trace file format, one operation per line::

    W,<key>,<words>     write <words> 32-byte words to <key>
    R,<key>             read <key>
    S,<key>,<count>     scan <count> keys starting at <key>
"""

from __future__ import annotations

import hashlib
import io
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TextIO, Union

from .errors import TraceParseError, WorkloadError
from .gas_model import WORD_BYTES

Key = str


class ReplState(IntEnum):
    """Replication state. NR sorts before R in the canonical record order."""

    NR = 0
    R = 1

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Record:
    key: Key
    value_words: int
    value: bytes
    state: ReplState = ReplState.NR

    def __post_init__(self) -> None:
        if self.value_words < 1:
            raise ValueError(f"value_words must be >= 1, got {self.value_words}")
        if len(self.value) != self.value_words * WORD_BYTES:
            raise ValueError(
                f"value of {len(self.value)} bytes does not fill "
                f"{self.value_words} words"
            )

    @property
    def position(self) -> tuple[int, Key]:
        """Canonical position: state group first, then key."""
        return (int(self.state), self.key)

    def with_state(self, state: ReplState) -> Record:
        return Record(self.key, self.value_words, self.value, state)

    def with_value(self, value: bytes) -> Record:
        return Record(self.key, self.value_words, value, self.state)


def canonical_sort_key(record: Record) -> tuple[int, Key]:
    return record.position


def canonical_order(records: Iterable[Record]) -> list[Record]:
    """All NR records before all R records, ascending key within each group."""
    return sorted(records, key=canonical_sort_key)


def make_value(key: Key, version: int, words: int) -> bytes:
    """Deterministic payload for the ``version``-th write of ``key``."""
    seed = hashlib.sha256(f"{key}:{version}".encode()).digest()
    header = version.to_bytes(8, "big") + seed[:24]
    body = b"".join(
        hashlib.sha256(seed + i.to_bytes(4, "big")).digest() for i in range(1, words)
    )
    return header + body


def value_version(value: bytes) -> int:
    """Inverse of :func:`make_value` for the version number."""
    return int.from_bytes(value[:8], "big")


@dataclass(frozen=True)
class Write:
    key: Key
    words: int = 1

    code = "W"


@dataclass(frozen=True)
class Read:
    key: Key

    code = "R"


@dataclass(frozen=True)
class Scan:
    start_key: Key
    count: int

    code = "S"

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"scan count must be >= 1, got {self.count}")


Operation = Union[Write, Read, Scan]
Trace = list[Operation]


@dataclass
class EpochBatch:
    """What the DO sends on chain at the end of an epoch.

    Attributes:
        epoch_index: Epoch the batch closes.
        writes: Latest records for keys that are replicated after the epoch.
        transitions: Net replication-state changes, as ``(key, new_state)``.
        digest: Root hash of the SP's tree after the epoch's updates.
    """

    epoch_index: int
    writes: list[Record] = field(default_factory=list)
    transitions: list[tuple[Key, ReplState]] = field(default_factory=list)
    digest: bytes = b""

    def __post_init__(self) -> None:
        keys = [r.key for r in self.writes]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate keys in epoch batch writes")

    @property
    def payload_words(self) -> int:
        """Words carried by the update transaction, digest included."""
        return 1 + sum(r.value_words for r in self.writes)

    def is_digest_only(self) -> bool:
        return not self.writes and not self.transitions


def _check_key(key: str, line_no: int) -> Key:
    if not key or any(ch in key for ch in ",\n\r") or key != key.strip():
        raise TraceParseError(line_no, f"invalid key {key!r}")
    return key


def _positive_int(text: str, line_no: int, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise TraceParseError(line_no, f"{what} is not an integer: {text!r}") from None
    if value < 1:
        raise TraceParseError(line_no, f"{what} must be >= 1, got {value}")
    return value


def parse_line(line: str, line_no: int) -> Operation:
    parts = line.split(",")
    code = parts[0]
    if code == "W":
        if len(parts) != 3:
            raise TraceParseError(line_no, "expected W,<key>,<words>")
        return Write(_check_key(parts[1], line_no), _positive_int(parts[2], line_no, "words"))
    if code == "R":
        if len(parts) != 2:
            raise TraceParseError(line_no, "expected R,<key>")
        return Read(_check_key(parts[1], line_no))
    if code == "S":
        if len(parts) != 3:
            raise TraceParseError(line_no, "expected S,<key>,<count>")
        return Scan(_check_key(parts[1], line_no), _positive_int(parts[2], line_no, "count"))
    raise TraceParseError(line_no, f"unknown op code {code!r}")


def iter_trace(text_stream: TextIO | str) -> Iterator[Operation]:
    if isinstance(text_stream, str):
        text_stream = io.StringIO(text_stream)
    for line_no, raw in enumerate(text_stream, start=1):
        line = raw[:-1] if raw.endswith("\n") else raw
        if not line:
            raise TraceParseError(line_no, "empty line")
        yield parse_line(line, line_no)


def parse_trace(text_stream: TextIO | str) -> Trace:
    """Parse a trace from a text stream (or a string) in file order.

    Raises:
        TraceParseError: on a malformed line or an unknown op code.

    Example:
        >>> parse_trace("W,k1,2\\nR,k1\\n")
        [Write(key='k1', words=2), Read(key='k1')]
    """
    return list(iter_trace(text_stream))


def format_op(op: Operation) -> str:
    if isinstance(op, Write):
        return f"W,{op.key},{op.words}"
    if isinstance(op, Read):
        return f"R,{op.key}"
    if isinstance(op, Scan):
        return f"S,{op.start_key},{op.count}"
    raise TypeError(f"not an operation: {op!r}")


def serialize_trace(trace: Iterable[Operation]) -> str:
    return "".join(format_op(op) + "\n" for op in trace)


def trace_keys(trace: Iterable[Operation]) -> set[Key]:
    keys: set[Key] = set()
    for op in trace:
        keys.add(op.start_key if isinstance(op, Scan) else op.key)
    return keys


def scan_keys(op: Scan, sorted_keys: Sequence[Key]) -> list[Key]:
    """Keys covered by a scan: ``count`` keys from the first key >= start."""
    from bisect import bisect_left

    i = bisect_left(sorted_keys, op.start_key)
    return list(sorted_keys[i : i + op.count])


def expand_scan(op: Operation, sorted_keys: Sequence[Key]) -> list[Operation]:
    """Decompose a scan into per-key reads; other operations pass through."""
    if isinstance(op, Scan):
        return [Read(k) for k in scan_keys(op, sorted_keys)]
    return [op]


def expand_scans(trace: Iterable[Operation], sorted_keys: Sequence[Key]) -> Trace:
    out: Trace = []
    for op in trace:
        out.extend(expand_scan(op, sorted_keys))
    return out


def latest_writes(ops: Sequence[Operation]) -> Trace:
    """Drop every write that a later write to the same key supersedes.

    Reads and scans keep their positions.

    Example:
        >>> [op.code for op in latest_writes([Write("a"), Read("a"), Write("a")])]
        ['R', 'W']
    """
    last = {op.key: i for i, op in enumerate(ops) if isinstance(op, Write)}
    return [
        op for i, op in enumerate(ops) if not isinstance(op, Write) or last[op.key] == i
    ]


def key_name(index: int, width: int = 6, prefix: str = "k") -> Key:
    """Zero-padded key so lexicographic order matches numeric order."""
    if index < 0:
        raise WorkloadError(f"key index must be >= 0, got {index}")
    return f"{prefix}{index:0{width}d}"
