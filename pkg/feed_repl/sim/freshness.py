"""Epoch-bounded query freshness."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..core import Key
from ..logging_config import get_logger

if TYPE_CHECKING:
    from .config import SimConfig
    from .engine import SimResult

logger = get_logger(__name__)

GENESIS_TIME = -1


@dataclass(frozen=True)
class FreshnessEntry:
    """One answered gGet.

    Attributes:
        key: Key read.
        get_time: Tick the gGet was issued.
        put_time: Tick of the gPut whose value was observed
            (``GENESIS_TIME`` for the preloaded value).
        version: Version of the observed value.
        delay: Ticks from the gGet to its callback; 0 for replica hits.
    """

    key: Key
    get_time: int
    put_time: int
    version: int
    delay: int


def required_version(
    puts: list[tuple[int, int]], get_time: int, bound: int
) -> int:
    """Latest version put strictly more than ``bound`` ticks before ``get_time``.

    ``puts`` is ``(time, version)`` in time order.
    """
    times = [t for t, _ in puts]
    i = bisect_left(times, get_time - bound)
    return puts[i - 1][1] if i else 0


def check_freshness(result: SimResult, config: SimConfig) -> bool:
    """True iff every sequentially ordered gGet saw the preceding gPut.

    A gGet at ``t2`` must observe the value of every gPut at ``t1`` with
    ``t1 + E + Pt + B*F < t2``, or a later one. Puts inside that window are
    concurrent and not checked.
    """
    bound = config.freshness_bound
    ok = True
    for entry in result.freshness_log:
        if entry.delay < 0:
            logger.warning("negative delay for %r at t=%d", entry.key, entry.get_time)
            ok = False
            continue
        need = required_version(result.put_log.get(entry.key, []), entry.get_time, bound)
        if entry.version < need:
            logger.warning(
                "stale read of %r at t=%d: saw version %d, expected >= %d",
                entry.key,
                entry.get_time,
                entry.version,
                need,
            )
            ok = False
    return ok
