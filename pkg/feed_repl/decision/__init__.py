"""Control plane: online replication policies, the offline oracle and adversaries."""

from .adaptive import (
    AdaptiveKPolicy,
    AdaptiveVariant,
    adaptive_k_predict,
    adaptive_policy_decide,
)
from .adversarial import (
    eager_replication_trace,
    worst_case_memorizing,
    worst_case_memoryless,
)
from .base import (
    DecisionDelta,
    ReplicationPolicy,
    StaticPolicy,
    Transition,
    deltas_to_csv,
)
from .costs import (
    OpCosts,
    cost_of_decisions,
    memorizing_bound,
    online_cost,
    replay_policy,
    step_cost,
)
from .memoryless import MemorylessPolicy, MemorylessState, memoryless_step
from .memorizing import MemorizingPolicy, MemorizingState, memorizing_step
from .offline import (
    OfflineResult,
    ScheduledPolicy,
    brute_force_optimal,
    offline_optimal,
)

__all__ = [
    "AdaptiveKPolicy",
    "AdaptiveVariant",
    "DecisionDelta",
    "MemorizingPolicy",
    "MemorizingState",
    "MemorylessPolicy",
    "MemorylessState",
    "OfflineResult",
    "OpCosts",
    "ReplicationPolicy",
    "ScheduledPolicy",
    "StaticPolicy",
    "Transition",
    "adaptive_k_predict",
    "adaptive_policy_decide",
    "brute_force_optimal",
    "cost_of_decisions",
    "deltas_to_csv",
    "eager_replication_trace",
    "memorizing_bound",
    "memorizing_step",
    "memoryless_step",
    "offline_optimal",
    "online_cost",
    "replay_policy",
    "step_cost",
    "worst_case_memorizing",
    "worst_case_memoryless",
]
