"""Tests for the offline optimum and its exhaustive reference."""

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from feed_repl.core import Read, ReplState, Scan, Write
from feed_repl.decision import (
    MemorylessPolicy,
    OpCosts,
    ScheduledPolicy,
    brute_force_optimal,
    cost_of_decisions,
    eager_replication_trace,
    offline_optimal,
    online_cost,
    worst_case_memoryless,
)
from feed_repl.errors import DecisionError
from feed_repl.sim import per_record_costs

ops = st.builds(
    lambda is_write, key: Write(key) if is_write else Read(key),
    st.booleans(),
    st.sampled_from("abc"),
)
traces = st.lists(ops, min_size=1, max_size=10)
FIXTURES_OK = [HealthCheck.function_scoped_fixture]

cost_models = st.builds(
    OpCosts,
    read_off=st.integers(1, 3000),
    read_on=st.integers(0, 300),
    write_share=st.integers(1, 3000),
    replica_insert=st.integers(1, 20000),
    replica_update=st.integers(1, 6000),
)


class TestOracleSoundness:
    @settings(max_examples=150, deadline=None, suppress_health_check=FIXTURES_OK)
    @given(trace=traces, costs=cost_models)
    def test_dp_matches_exhaustive(self, trace, costs, schedule):
        assert offline_optimal(trace, schedule, costs).total == brute_force_optimal(trace, costs)

    @settings(max_examples=50, deadline=None, suppress_health_check=FIXTURES_OK)
    @given(trace=traces, costs=cost_models)
    def test_decisions_achieve_total(self, trace, costs, schedule):
        """Test that the returned decisions cost exactly the reported optimum."""
        result = offline_optimal(trace, schedule, costs)
        assert cost_of_decisions(trace, result.decisions, costs) == result.total

    @settings(max_examples=50, deadline=None, suppress_health_check=FIXTURES_OK)
    @given(trace=traces, costs=cost_models)
    def test_never_worse_than_online(self, trace, costs, schedule):
        opt = offline_optimal(trace, schedule, costs).total
        assert opt <= online_cost(trace, MemorylessPolicy(2), costs)


class TestKnownOptima:
    def test_write_heavy_stays_off_chain(self, schedule):
        costs = per_record_costs(schedule)
        result = offline_optimal(worst_case_memoryless(2, 5), schedule, costs)
        assert result.total == 5 * (2817 + 2 * 2212)
        assert set(result.decisions) == {ReplState.NR}

    def test_read_heavy_replicates_once(self, schedule):
        costs = per_record_costs(schedule)
        trace = [Write("a")] + [Read("a")] * 50
        result = offline_optimal(trace, schedule, costs)
        # replicate with the write, then 50 on-chain reads
        assert result.total == 2817 + (20000 + 2176) + 50 * 200
        assert result.decisions[0] == ReplState.R

    def test_memoryless_online_cost_on_worst_case(self, schedule):
        costs = per_record_costs(schedule)
        n = 10
        online = online_cost(worst_case_memoryless(2, n), MemorylessPolicy(2), costs)
        # the first replication inserts, later ones update the slot
        assert online == (2817 + 2 * 2212 + 7176) * n + 15000

    def test_mutated_policy_exceeds_two(self, schedule):
        """Test that a counter kept across writes breaks the 2x bound."""
        costs = per_record_costs(schedule, writes_per_epoch=20)
        trace = eager_replication_trace(2, 50)
        opt = offline_optimal(trace, schedule, costs).total
        mutated = online_cost(trace, MemorylessPolicy(2, reset_on_write=False), costs)
        correct = online_cost(trace, MemorylessPolicy(2), costs)
        assert opt == 5832 + 50 * 3620
        assert mutated == 28008 + 50 * 10796
        assert mutated > 2 * opt + schedule.tx_base
        assert correct <= 2 * opt + schedule.tx_base
        assert mutated / opt > 2

    def test_scans_expanded_over_keys(self, schedule):
        costs = per_record_costs(schedule)
        trace = [Write("a"), Write("b"), Scan("a", 2)]
        result = offline_optimal(trace, schedule, costs, keys=["a", "b"])
        assert len(result.decisions) == 4

    def test_empty_trace_rejected(self, schedule):
        with pytest.raises(DecisionError):
            offline_optimal([], schedule, per_record_costs(schedule))

    def test_per_key_costs(self, schedule):
        small = per_record_costs(schedule, words=1)
        large = per_record_costs(schedule, words=32)
        trace = [Write("a", 1), Write("b", 32), Read("a"), Read("b")]
        lookup = {"a": small, "b": large}.__getitem__
        assert offline_optimal(trace, schedule, lookup).total == brute_force_optimal(
            trace, lookup
        )


class TestScheduledPolicy:
    def test_replays_decisions(self, schedule):
        costs = per_record_costs(schedule)
        trace = [Write("a")] + [Read("a")] * 5
        result = offline_optimal(trace, schedule, costs)
        policy = ScheduledPolicy(result.decisions)
        assert online_cost(trace, policy, costs) == result.total

    def test_runs_past_end(self):
        policy = ScheduledPolicy([ReplState.NR])
        policy.observe(Read("a"))
        with pytest.raises(DecisionError):
            policy.observe(Read("a"))
