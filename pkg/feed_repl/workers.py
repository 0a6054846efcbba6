"""Worker objects for running independent simulations in parallel.

Runs share no mutable state, so a sweep can fan them out over a thread
pool; results come back in submission order so merged CSVs are stable.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Generic, TypeVar

from .logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


class SimulationWorker(Generic[T]):
    """One named unit of work with completion and failure callbacks.

    ``run()`` calls ``task()`` and reports through ``on_complete(name,
    result)`` or ``on_failed(name, message)``. Calling ``stop()`` before the
    worker starts makes ``run()`` return without doing anything.

    Example:
        >>> worker = SimulationWorker("bl1", lambda: 42)
        >>> worker.run()
        42
    """

    def __init__(
        self,
        name: str,
        task: Callable[[], T],
        on_complete: Callable[[str, T], None] | None = None,
        on_failed: Callable[[str, str], None] | None = None,
    ):
        self.name = name
        self.task = task
        self.on_complete = on_complete
        self.on_failed = on_failed
        self._should_stop = False

    def stop(self) -> None:
        """Request cancellation; a run already in progress finishes."""
        self._should_stop = True

    @property
    def stopped(self) -> bool:
        return self._should_stop

    def run(self) -> T | None:
        if self._should_stop:
            return None
        try:
            logger.debug("worker %s starting", self.name)
            result = self.task()
        except Exception as e:
            logger.error("worker %s failed: %s", self.name, e)
            if self.on_failed is not None and not self._should_stop:
                self.on_failed(self.name, str(e))
            raise
        if self._should_stop:
            return None
        if self.on_complete is not None:
            self.on_complete(self.name, result)
        return result


def run_workers(
    workers: Sequence[SimulationWorker[T]], max_workers: int | None = None
) -> list[T | None]:
    """Run ``workers`` on a thread pool; results follow submission order.

    With ``max_workers=1`` workers run inline and the first failure stops
    the batch; otherwise it is re-raised once every worker has finished.
    """
    if not workers:
        return []
    if max_workers == 1:
        return [w.run() for w in workers]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(w.run) for w in workers]
        errors = [f.exception() for f in futures]
    for err in errors:
        if err is not None:
            raise err
    return [f.result() for f in futures]
