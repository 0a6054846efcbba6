"""Workload-adaptive K.

On every write the policy predicts K for the key as the mean number of
reads that followed its last ``window`` writes, and decides the state of the
new value right away. K1 replicates when the prediction reaches the
threshold; K2 takes the opposite decision.
"""

from __future__ import annotations

from collections.abc import Sequence
from enum import Enum

from ..core import Key, ReplState
from ..errors import DecisionError
from .base import DecisionDelta, ReplicationPolicy


class AdaptiveVariant(str, Enum):
    K1 = "K1"
    K2 = "K2"


def adaptive_k_predict(write_history: Sequence[int], window: int) -> float:
    """Mean reads-per-write over the last ``window`` writes; 0.0 without history.

    Example:
        >>> adaptive_k_predict([4, 4, 4, 100], 3)
        36.0
    """
    if window < 1:
        raise DecisionError(f"window must be >= 1, got {window}")
    recent = list(write_history)[-window:]
    if not recent:
        return 0.0
    return sum(recent) / len(recent)


def adaptive_policy_decide(
    predicted_k: float, threshold_k: int, variant: AdaptiveVariant | str
) -> ReplState:
    replicate = predicted_k >= threshold_k
    if AdaptiveVariant(variant) == AdaptiveVariant.K2:
        replicate = not replicate
    return ReplState.R if replicate else ReplState.NR


class AdaptiveKPolicy(ReplicationPolicy):
    """Per-key reads-per-write history driving a K1 or K2 decision on each write."""

    def __init__(
        self, threshold_k: int, window: int = 3, variant: AdaptiveVariant | str = "K1"
    ):
        super().__init__()
        if threshold_k < 1:
            raise DecisionError(f"threshold K must be >= 1, got {threshold_k}")
        if window < 1:
            raise DecisionError(f"window must be >= 1, got {window}")
        self.threshold_k = threshold_k
        self.window = window
        self.variant = AdaptiveVariant(variant)
        self.history: dict[Key, list[int]] = {}
        self._reads_since_write: dict[Key, int] = {}
        self.name = f"adaptive-{self.variant.value}(window={window})"

    def on_write(self, key: Key) -> DecisionDelta:
        if key in self._reads_since_write:
            hist = self.history.setdefault(key, [])
            hist.append(self._reads_since_write[key])
            del hist[: -self.window]
        self._reads_since_write[key] = 0
        predicted = adaptive_k_predict(self.history.get(key, []), self.window)
        delta = DecisionDelta()
        self._set(key, adaptive_policy_decide(predicted, self.threshold_k, self.variant), delta)
        return delta

    def on_read(self, key: Key) -> DecisionDelta:
        if key in self._reads_since_write:
            self._reads_since_write[key] += 1
        return DecisionDelta()
