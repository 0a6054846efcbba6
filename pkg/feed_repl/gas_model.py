"""Blockchain gas cost model.

Every cost in the simulator is derived from a :class:`GasSchedule`. The
schedule holds per-word prices for transactions, storage writes, storage
reads and hashing; all functions here are pure and word-granular (one word
is 32 bytes).

Example:
    >>> schedule = GasSchedule()
    >>> schedule.tx_cost(1)
    23176
    >>> default_k(schedule)
    2
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .errors import ScheduleError
from .logging_config import get_logger

logger = get_logger(__name__)

WORD_BYTES = 32


@dataclass(frozen=True)
class GasSchedule:
    """Gas prices for the operations the storage-manager contract performs.

    Attributes:
        tx_base: Flat cost of any transaction.
        tx_per_word: Calldata cost per word carried by a transaction.
        insert_per_word: Writing a storage slot that was never set.
        update_per_word: Overwriting an existing storage slot.
        read_per_word: Reading contract storage.
        hash_base: Flat cost of one hash invocation.
        hash_per_word: Hashing cost per input word.
    """

    tx_base: int = 21000
    tx_per_word: int = 2176
    insert_per_word: int = 20000
    update_per_word: int = 5000
    read_per_word: int = 200
    hash_base: int = 30
    hash_per_word: int = 6

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ScheduleError(f"{f.name} must be an integer, got {value!r}")
            if value <= 0:
                raise ScheduleError(f"{f.name} must be > 0, got {value}")
        ordered = (
            self.insert_per_word
            > self.update_per_word
            > self.tx_per_word
            > self.read_per_word
        )
        if not ordered:
            logger.warning(
                "unusual schedule: expected insert > update > tx > read per word, "
                "got %d/%d/%d/%d",
                self.insert_per_word,
                self.update_per_word,
                self.tx_per_word,
                self.read_per_word,
            )

    def tx_cost(self, words: int) -> int:
        _check_words(words)
        return self.tx_base + self.tx_per_word * words

    def insert_cost(self, words: int) -> int:
        _check_words(words)
        return self.insert_per_word * words

    def update_cost(self, words: int) -> int:
        _check_words(words)
        return self.update_per_word * words

    def read_cost(self, words: int) -> int:
        _check_words(words)
        return self.read_per_word * words

    def hash_cost(self, words: int) -> int:
        _check_words(words)
        return self.hash_base + self.hash_per_word * words

    def off_chain_read_unit_cost(self) -> int:
        """Marginal per-word cost of moving data on chain in a deliver.

        The flat transaction base is excluded; it is charged per deliver by
        the simulator's accounting.
        """
        return self.tx_per_word

    def with_overrides(self, **overrides: int) -> GasSchedule:
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ScheduleError(f"unknown schedule fields: {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


DEFAULT_SCHEDULE = GasSchedule()


def _check_words(words: int) -> None:
    if words < 0:
        raise ScheduleError(f"word count must be >= 0, got {words}")


def words_for_bytes(n_bytes: int) -> int:
    """Number of 32-byte words needed for ``n_bytes`` (partial words round up)."""
    if n_bytes < 0:
        raise ScheduleError(f"byte count must be >= 0, got {n_bytes}")
    return -(-n_bytes // WORD_BYTES)


def tx_cost(words: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.tx_cost(words)


def insert_cost(words: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.insert_cost(words)


def update_cost(words: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.update_cost(words)


def read_cost(words: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.read_cost(words)


def hash_cost(words: int, schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.hash_cost(words)


def off_chain_read_unit_cost(schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    return schedule.off_chain_read_unit_cost()


def default_k(schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    """Replication threshold K = update / off-chain read, floored, at least 1.

    Args:
        schedule: Gas schedule to derive K from.

    Returns:
        Number of consecutive reads after which the memoryless policy
        replicates a record.

    Example:
        >>> default_k(GasSchedule(update_per_word=21760))
        10
    """
    unit = schedule.off_chain_read_unit_cost()
    if unit <= 0:
        raise ScheduleError("off-chain read unit cost must be > 0")
    return max(1, schedule.update_per_word // unit)


def default_k_prime(schedule: GasSchedule = DEFAULT_SCHEDULE) -> int:
    """K' for the memorizing policy; the write cost is taken as the update cost."""
    return default_k(schedule)
