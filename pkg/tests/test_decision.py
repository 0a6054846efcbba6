"""Unit tests for the online replication policies and the cost model."""

import pytest

from feed_repl.core import Read, ReplState, Scan, Write
from feed_repl.decision import (
    AdaptiveKPolicy,
    MemorizingPolicy,
    MemorylessPolicy,
    OpCosts,
    StaticPolicy,
    adaptive_k_predict,
    adaptive_policy_decide,
    cost_of_decisions,
    eager_replication_trace,
    memorizing_bound,
    offline_optimal,
    online_cost,
    replay_policy,
    step_cost,
    worst_case_memorizing,
    worst_case_memoryless,
)
from feed_repl.errors import DecisionError
from feed_repl.sim import (
    converged_d,
    converged_k_prime,
    deliver_read_cost,
    per_record_costs,
)

R, NR = ReplState.R, ReplState.NR


def states(policy, trace):
    return [str(s) for s in replay_policy(trace, policy)]


class TestMemoryless:
    def test_replicates_after_k_reads(self):
        trace = [Write("a"), Read("a"), Read("a"), Read("a")]
        assert states(MemorylessPolicy(2), trace) == ["NR", "NR", "R", "R"]

    def test_write_evicts_and_resets(self):
        """Test that a write drops the replica and restarts the count."""
        trace = [Read("a"), Read("a"), Write("a"), Read("a"), Read("a")]
        assert states(MemorylessPolicy(2), trace) == ["NR", "R", "NR", "NR", "R"]

    def test_write_between_reads_resets(self):
        trace = [Read("a"), Write("a"), Read("a"), Write("a"), Read("a")]
        assert states(MemorylessPolicy(2), trace) == ["NR"] * 5

    def test_keys_are_independent(self):
        trace = [Read("a"), Read("b"), Read("a")]
        policy = MemorylessPolicy(2)
        replay_policy(trace, policy)
        assert policy.state("a") == R
        assert policy.state("b") == NR

    def test_delta_reports_transition(self):
        policy = MemorylessPolicy(1)
        delta = policy.observe(Read("a"))
        assert [(t.key, t.old, t.new) for t in delta] == [("a", NR, R)]

    def test_counter_bounded(self):
        policy = MemorylessPolicy(3)
        state = policy.memory
        for _ in range(10):
            policy.observe(Read("a"))
            assert 0 <= state.count.get("a", 0) <= 3

    def test_scan_must_be_expanded(self):
        with pytest.raises(TypeError):
            MemorylessPolicy(2).observe(Scan("a", 2))

    def test_invalid_k(self):
        with pytest.raises(DecisionError):
            MemorylessPolicy(0)

    def test_mutated_counter_replicates_eagerly(self):
        """Test that without the reset one read after a write re-replicates."""
        trace = [Write("a"), Read("a"), Read("a"), Write("a"), Read("a")]
        assert states(MemorylessPolicy(2, reset_on_write=False), trace)[-1] == "R"
        assert states(MemorylessPolicy(2), trace)[-1] == "NR"


class TestMemorizing:
    def test_replicates_when_reads_dominate(self):
        # K'=1, D=1: R once w + 1 <= r
        trace = [Write("a"), Read("a"), Read("a")]
        assert states(MemorizingPolicy(1, 1), trace) == ["NR", "NR", "R"]

    def test_counters_rebased_on_replication(self):
        policy = MemorizingPolicy(1, 1)
        replay_policy([Write("a"), Read("a"), Read("a")], policy)
        assert policy.memory.counters("a") == (0, 1)

    def test_evicts_when_writes_dominate(self):
        policy = MemorizingPolicy(1, 1)
        replay_policy([Read("a")], policy)
        assert policy.state("a") == R
        # r=1 after rebase; evict once w - 1 >= 1
        replay_policy([Write("a")], policy)
        assert policy.state("a") == R
        replay_policy([Write("a")], policy)
        assert policy.state("a") == NR
        assert policy.memory.counters("a") == (1, 0)

    def test_hysteresis_window(self):
        """Test that a larger D needs more reads to replicate."""
        trace = [Read("a")] * 2
        assert states(MemorizingPolicy(1, 3), trace) == ["NR", "NR"]
        assert states(MemorizingPolicy(1, 3), trace + [Read("a")])[-1] == "R"

    def test_invalid_parameters(self):
        with pytest.raises(DecisionError):
            MemorizingPolicy(0, 1)
        with pytest.raises(DecisionError):
            MemorizingPolicy(1, 0)


class TestAdaptive:
    def test_predict_mean_of_window(self):
        assert adaptive_k_predict([4, 4, 4, 100], 3) == 36.0
        assert adaptive_k_predict([], 3) == 0.0

    def test_predict_invalid_window(self):
        with pytest.raises(DecisionError):
            adaptive_k_predict([1], 0)

    def test_decide_variants(self):
        assert adaptive_policy_decide(3.0, 2, "K1") == R
        assert adaptive_policy_decide(3.0, 2, "K2") == NR
        assert adaptive_policy_decide(1.0, 2, "K1") == NR

    def test_k1_replicates_read_heavy_key(self):
        policy = AdaptiveKPolicy(2, window=2, variant="K1")
        trace = [Write("a"), Read("a"), Read("a"), Read("a"), Write("a")]
        assert states(policy, trace) == ["NR", "NR", "NR", "NR", "R"]
        assert policy.history["a"] == [3]

    def test_k2_inverts(self):
        policy = AdaptiveKPolicy(2, window=2, variant="K2")
        trace = [Write("a"), Read("a"), Read("a"), Read("a"), Write("a")]
        assert states(policy, trace)[-1] == "NR"
        assert states(AdaptiveKPolicy(2, 2, "K2"), [Write("b")]) == ["R"]

    def test_history_window(self):
        policy = AdaptiveKPolicy(2, window=2)
        trace = [Write("a"), Read("a"), Write("a"), Write("a"), Read("a")] * 2
        replay_policy(trace, policy)
        assert len(policy.history["a"]) <= 2


class TestStatic:
    def test_never_replicates(self):
        assert states(StaticPolicy(), [Read("a")] * 5) == ["NR"] * 5


class TestCosts:
    COSTS = OpCosts(read_off=10, read_on=1, write_share=3, replica_insert=50, replica_update=20)

    def test_per_record_costs_defaults(self, schedule):
        costs = per_record_costs(schedule)
        assert costs.read_off == 2176 + 36 == 2212
        assert costs.read_on == 200
        assert costs.write_share == (23176 + 5000) // 10 == 2817
        # replica writes carry the value as calldata in the update
        assert costs.replica_insert == 20000 + 2176
        assert costs.replica_update == 5000 + 2176

    def test_write_share_scales_with_batch(self, schedule):
        assert per_record_costs(schedule, writes_per_epoch=20).write_share == 1408

    def test_deliver_read_with_siblings(self, schedule):
        assert deliver_read_cost(schedule, 1, 0) == 23176 + 36 == 23212
        assert deliver_read_cost(schedule, 1, 2) == 21000 + 3 * 2176 + 36 + 2 * 42

    @pytest.mark.parametrize("words,siblings", [(1, 0), (1, 16), (32, 16)])
    def test_one_read_per_deliver_is_the_ledger_charge(self, schedule, words, siblings):
        costs = per_record_costs(schedule, words, siblings, reads_per_deliver=1)
        assert costs.read_off == deliver_read_cost(schedule, words, siblings)

    def test_shared_deliver_splits_the_base(self, schedule):
        assert per_record_costs(schedule, reads_per_deliver=4).read_off == 2212 + 5250
        with pytest.raises(ValueError):
            per_record_costs(schedule, reads_per_deliver=0)

    def test_converged_k_prime(self, schedule):
        assert converged_k_prime(schedule) == max(1, 7176 // 23212) == 1
        assert converged_k_prime(schedule.with_overrides(update_per_word=50000)) == 2

    def test_converged_d(self, schedule):
        assert converged_d(schedule) == 1
        # 1024-byte records behind a 2^16-record tree
        assert converged_d(schedule, 32, 16) == 6

    def test_step_cost_read(self):
        assert step_cost(Read("a"), NR, NR, False, self.COSTS) == 10
        assert step_cost(Read("a"), R, R, True, self.COSTS) == 1
        assert step_cost(Read("a"), NR, R, False, self.COSTS) == 60
        assert step_cost(Read("a"), NR, R, True, self.COSTS) == 30

    def test_step_cost_write(self):
        assert step_cost(Write("a"), NR, NR, False, self.COSTS) == 3
        assert step_cost(Write("a"), R, R, True, self.COSTS) == 23
        assert step_cost(Write("a"), R, NR, True, self.COSTS) == 3

    def test_slot_reuse_after_eviction(self):
        """Test that only the first replication of a key pays the insert."""
        trace = [Read("a"), Write("a"), Read("a")]
        total = cost_of_decisions(trace, [R, NR, R], self.COSTS)
        assert total == (10 + 50) + 3 + (10 + 20)

    def test_online_cost_matches_replay(self):
        trace = worst_case_memoryless(2, 3)
        policy_states = replay_policy(trace, MemorylessPolicy(2))
        assert online_cost(trace, MemorylessPolicy(2), self.COSTS) == cost_of_decisions(
            trace, policy_states, self.COSTS
        )

    def test_memorizing_bound_exact_regime(self):
        costs = OpCosts(read_off=1, read_on=0, write_share=1, replica_insert=4, replica_update=4)
        assert memorizing_bound(4, 1, costs) == max(6 / 4, 3 * 1 / 4 + 1)

    @pytest.mark.parametrize("k_prime,d", [(2, 1), (4, 2)])
    def test_worst_case_within_exact_bound(self, schedule, k_prime, d):
        """Test that (4D+2)/K' alone bounds the adversarial traces when it is >= 1."""
        costs = per_record_costs(schedule)
        exact = (4 * d + 2) / k_prime
        for n in range(1, 31):
            trace = worst_case_memorizing(k_prime, d, n)
            online = online_cost(trace, MemorizingPolicy(k_prime, d), costs)
            opt = offline_optimal(trace, schedule, costs).total
            assert online <= exact * opt + schedule.tx_base

    def test_exact_bound_below_one_needs_the_price_term(self, schedule):
        """Test that K'=8, D=1 falls back to the price-ratio bound."""
        costs = per_record_costs(schedule)
        assert (4 * 1 + 2) / 8 < 1
        assert memorizing_bound(8, 1, costs) == 3 * 2212 / 7176 + 1


class TestAdversarialTraces:
    def test_worst_case_memoryless_shape(self):
        trace = worst_case_memoryless(2, 2)
        assert [op.code for op in trace] == ["W", "R", "R", "W", "R", "R"]

    def test_worst_case_memorizing_shape(self):
        trace = worst_case_memorizing(2, 1, 1)
        assert [op.code for op in trace] == ["R", "R", "R", "W", "W"]

    def test_eager_replication_shape(self):
        trace = eager_replication_trace(2, 2)
        assert [op.code for op in trace] == ["W", "R", "R", "W", "R", "W", "R"]

    @pytest.mark.parametrize(
        "make", [lambda: worst_case_memoryless(0, 1), lambda: worst_case_memorizing(1, 0, 1)]
    )
    def test_invalid(self, make):
        with pytest.raises(DecisionError):
            make()
