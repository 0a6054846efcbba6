"""Tests for the chain contract, gas accounting and the simulation engine."""

import pytest

from feed_repl.ads import build, prove_key, prove_range
from feed_repl.core import EpochBatch, Read, Record, ReplState, Scan, Write, make_value
from feed_repl.decision import MemorylessPolicy, StaticPolicy
from feed_repl.errors import ConfigError, SimulationError
from feed_repl.sim import (
    ChainState,
    DataOwner,
    GasLedger,
    PolicyKind,
    PolicySpec,
    RequestEmitted,
    SimConfig,
    Simulation,
    StorageProvider,
    SyncHit,
    TxReceipt,
    check_freshness,
    contract_deliver,
    contract_deliver_range,
    contract_direct_write,
    contract_gget,
    contract_gget_range,
    contract_update,
    deliver_read_cost,
    do_epoch,
    make_provider,
    price,
    recount,
    run,
    run_baseline,
)

NR, R = ReplState.NR, ReplState.R


def record(key, version=0, state=NR):
    return Record(key, 1, make_value(key, version, 1), state)


def interleaved(keys, blocks, reads=2):
    trace = []
    for i in range(blocks):
        key = keys[i % len(keys)]
        trace.append(Write(key))
        trace.extend([Read(key)] * reads)
    return trace


@pytest.fixture
def chain(schedule, four_records):
    tree = four_records.tree()
    state = ChainState(schedule, root_hash=tree.root)
    state.replicas = {r.key: r for r in four_records.records if r.state == R}
    state.slots = set(state.replicas)
    return state


class TestContract:
    def test_gget_hit_is_synchronous(self, chain):
        seen = []
        result = contract_gget(chain, "x", lambda k, r: seen.append(k))
        assert isinstance(result, SyncHit)
        assert seen == ["x"]
        assert chain.receipts[-1].charge.total == 200

    def test_gget_miss_emits_request(self, chain):
        result = contract_gget(chain, "w", lambda k, r: None, time=7)
        assert isinstance(result, RequestEmitted)
        event = chain.event_log[result.request_id]
        assert (event.key, event.time) == ("w", 7)
        assert chain.receipts == []

    def test_gget_range_splits_hits_and_misses(self, chain):
        hits, request = contract_gget_range(chain, ["w", "x", "y"], lambda k, r: None)
        assert [r.key for r in hits] == ["x"]
        assert request is not None
        assert chain.event_log[request.request_id].keys == ("w", "y")

    def test_deliver_verifies_and_charges(self, chain, four_records, schedule):
        tree = four_records.tree()
        proof = prove_key(tree, "w", NR)
        seen = []
        ok = contract_deliver(chain, "w", tree.get("w"), False, proof, lambda k, r: seen.append(r))
        assert ok
        assert seen == [tree.get("w")]
        assert chain.receipts[-1].charge.total == deliver_read_cost(schedule, 1, 2)

    def test_rejected_deliver_is_still_charged(self, chain, four_records):
        tree = four_records.tree()
        proof = prove_key(tree, "w", NR)
        forged = tree.get("w").with_value(bytes(32))
        seen = []
        ok = contract_deliver(chain, "w", forged, False, proof, lambda k, r: seen.append(k))
        assert not ok
        assert seen == []
        assert chain.receipts[-1].ok is False
        assert chain.receipts[-1].charge.total > 0

    def test_deliver_with_replicate_flag_stores(self, chain, four_records):
        tree = four_records.tree()
        contract_deliver(chain, "w", tree.get("w"), True, prove_key(tree, "w", NR), lambda k, r: None)
        assert chain.replicas["w"].state == R
        assert chain.receipts[-1].inserts == [1]

    def test_range_deliver(self, chain, four_records):
        tree = four_records.tree()
        proof = prove_range(tree, "w", "y", NR)
        seen = []
        ok = contract_deliver_range(
            chain, ("w", "y"), list(proof.records), proof, lambda k, r: seen.append(k)
        )
        assert ok
        assert seen == ["w", "y"]

    def test_range_deliver_with_omission_rejected(self, chain, four_records):
        tree = four_records.tree()
        proof = prove_range(tree, "w", "y", NR)
        ok = contract_deliver_range(chain, ("w", "y"), list(proof.records[:1]), proof, lambda k, r: None)
        assert not ok

    def test_update_from_stranger_rejected(self, chain):
        root = chain.root_hash
        batch = EpochBatch(0, digest=bytes(32))
        assert contract_update(chain, batch, sender="SP") is False
        assert chain.root_hash == root
        assert chain.receipts == []

    def test_update_pins_digest_and_evicts(self, chain, schedule):
        batch = EpochBatch(
            0, writes=[record("w", 1, R)], transitions=[("w", R), ("x", NR)], digest=bytes(32)
        )
        assert contract_update(chain, batch)
        assert chain.root_hash == bytes(32)
        assert chain.replica_keys() == {"w", "z"}
        receipt = chain.receipts[-1]
        assert receipt.inserts == [1]
        assert receipt.charge.total == schedule.tx_cost(2) + 20000 + 5000

    def test_slot_reuse_is_an_update(self, chain):
        contract_direct_write(chain, record("x", 1, R))
        assert chain.receipts[-1].updates == [1]
        contract_direct_write(chain, record("q", 1, R))
        assert chain.receipts[-1].inserts == [1]
        assert chain.receipts[-1].charge.total == 23176 + 20000


class TestAccounting:
    def test_price_itemised(self, schedule):
        receipt = TxReceipt("update", 0, 0, tx_words=1, updates=[1])
        charge = price(receipt, schedule)
        assert (charge.tx, charge.storage, charge.verify) == (23176, 5000, 0)

    def test_inner_call_pays_no_base(self, schedule):
        assert price(TxReceipt("gget_hit", 0, 0, reads=[1]), schedule).total == 200

    def test_recount(self, schedule):
        receipts = [
            TxReceipt("update", 0, 0, tx_words=1, updates=[1]),
            TxReceipt("deliver", 0, 0, tx_words=1, hashed_words=[1]),
        ]
        assert recount(receipts, schedule) == 28176 + 23212


class TestConfig:
    def test_timing_defaults(self, config):
        assert config.finality_lag == 91
        assert config.freshness_bound == 151

    @pytest.mark.parametrize(
        "text,kind",
        [
            ("grub", PolicyKind.CONVERGED),
            ("BL1", PolicyKind.BL1),
            ("Adaptive_K1", PolicyKind.ADAPTIVE_K1),
            ("k2", PolicyKind.ADAPTIVE_K2),
            ("offline-optimal", PolicyKind.OFFLINE),
        ],
    )
    def test_policy_aliases(self, text, kind):
        assert PolicySpec.parse(text).kind == kind

    def test_policy_parameters(self):
        spec = PolicySpec.parse("memorizing:k'=2,d=3")
        assert (spec.k, spec.d) == (2, 3)
        assert PolicySpec.parse("memorizing:k=2,d=1").name == "memorizing(K'=2,D=1)"
        assert PolicySpec.parse("memoryless").name == "memoryless(K=auto)"

    @pytest.mark.parametrize(
        "text", ["nope", "memoryless:k=0", "memoryless:x=1", "memoryless:k=two", "memorizing:d=0"]
    )
    def test_bad_policy(self, text):
        with pytest.raises(ConfigError):
            PolicySpec.parse(text)

    def test_baseline_flag(self):
        assert PolicySpec.parse("BL2").is_baseline
        assert not PolicySpec.parse("grub").is_baseline

    @pytest.mark.parametrize("field", ["epoch_len", "block_time", "propagation_delay", "finality_blocks"])
    def test_non_positive_timing_rejected(self, field):
        with pytest.raises(ConfigError):
            SimConfig(**{field: 0})

    def test_with_policy(self, config):
        assert config.with_policy("BL1").policy.kind == PolicyKind.BL1
        assert config.policy.kind == PolicyKind.CONVERGED


class TestLedger:
    def test_negative_epoch_rejected(self):
        with pytest.raises(SimulationError):
            GasLedger().entry(-1)

    def test_per_op_skips_warmup(self, schedule):
        ledger = GasLedger()
        ledger.count_op(0, 10)
        ledger.count_op(1, 10)
        ledger.add_receipts(
            [
                TxReceipt("update", 0, 0, charge=price(TxReceipt("u", 0, 0, tx_words=1), schedule)),
                TxReceipt("hit", 1, 0, charge=price(TxReceipt("h", 1, 0, reads=[1]), schedule)),
            ]
        )
        assert ledger.per_op_gas() == (23176 + 200) / 20
        assert ledger.per_op_gas(skip_epochs=1) == 20.0


class TestDataOwnerEpoch:
    @pytest.fixture
    def owner(self):
        records = {k: record(k) for k in ("a", "b")}
        tree = build([records["a"], records["b"]])
        return DataOwner(records, MemorylessPolicy(1), StorageProvider(tree))

    def test_read_replicates(self, owner):
        batch = do_epoch(owner, 0, {}, [Read("a")])
        assert batch.transitions == [("a", R)]
        assert [r.key for r in batch.writes] == ["a"]
        assert batch.digest == owner.root == owner.provider.tree.root
        assert owner.replicated == {"a"}

    def test_unreplicated_write_only_moves_digest(self, owner):
        root = owner.root
        batch = do_epoch(owner, 0, {"b": record("b", 1)}, [Write("b")])
        assert batch.writes == []
        assert batch.transitions == []
        assert batch.digest != root
        assert owner.records["b"].value == make_value("b", 1, 1)

    @pytest.mark.parametrize("every_write", [False, True])
    def test_policy_sees_last_write_per_key(self, every_write):
        seen = []

        class Recorder(StaticPolicy):
            sees_every_write = every_write

            def observe(self, op):
                seen.append(op)
                return super().observe(op)

        records = {k: record(k) for k in ("a", "b")}
        provider = StorageProvider(build(list(records.values())))
        owner = DataOwner(records, Recorder(), provider)
        ops = [Write("a"), Read("a"), Write("a")]
        do_epoch(owner, 0, {"a": record("a", 2)}, ops)
        assert seen == (ops if every_write else [Read("a"), Write("a")])


class TestProviderVersions:
    @pytest.fixture
    def owner(self):
        records = {k: record(k) for k in ("a", "b")}
        tree = build([records["a"], records["b"]])
        return DataOwner(records, MemorylessPolicy(1), StorageProvider(tree))

    def test_forget_before_keeps_genesis_and_newer(self, owner):
        for version in range(1, 5):
            do_epoch(owner, version - 1, {"b": record("b", version)}, [Write("b")])
        provider = owner.provider
        roots = list(provider.roots)
        assert len(roots) == 5
        assert provider.forget_before(roots[3]) == 2
        assert provider.roots == [roots[0], roots[3], roots[4]]
        assert set(provider.snapshots) == set(provider.roots)
        assert provider.at(roots[0]).root == roots[0]
        with pytest.raises(SimulationError):
            provider.at(roots[1])

    def test_forget_before_pinned_genesis_is_a_no_op(self, owner):
        genesis = owner.provider.roots[0]
        do_epoch(owner, 0, {"b": record("b", 1)}, [Write("b")])
        assert owner.provider.forget_before(genesis) == 0
        assert len(owner.provider.snapshots) == 2

    def test_forget_before_unknown_root(self, owner):
        with pytest.raises(SimulationError):
            owner.provider.forget_before(b"\x00" * 32)

    def test_long_run_keeps_few_versions(self, config):
        """Test that finalized updates release the tree versions behind them."""
        sim = Simulation(interleaved(["a", "b", "c", "d"], 300), config)
        result = sim.execute()
        assert sim.owner is not None
        provider = sim.owner.provider
        assert len(provider.snapshots) == len(provider.roots) <= 3
        assert sim.chain.root_hash in provider.snapshots
        assert check_freshness(result, config)
        assert result.integrity_events == []


class TestEngine:
    def test_bl1_write_costs_one_digest_update(self, config):
        result = run([Write("k")], config.with_policy("BL1"))
        assert result.total_gas == 23176 + 5000
        assert [e.kind for e in result.events] == ["update_submit", "update_final"]

    def test_bl1_read_is_delivered_after_finality(self, config):
        result = run([Read("k")], config.with_policy("BL1"))
        assert result.total_gas == 23212
        (entry,) = result.freshness_log
        # submitted at the block after t=1, final 91 ticks later
        assert entry.delay == 106
        assert entry.version == 0

    def test_bl2_write_and_hit(self, config):
        assert run_baseline([Write("k")], config, "BL2").total_gas == 28176
        result = run_baseline([Read("k")], config, "BL2")
        assert result.total_gas == 200
        assert result.freshness_log[0].delay == 0

    def test_unknown_baseline(self, config):
        with pytest.raises(ValueError):
            run_baseline([Read("k")], config, "BL3")

    def test_converged_policy_replicates_hot_key(self, config, schedule):
        """Test that a read-only key is served on chain once replication is final."""
        result = run([Read("k")] * 400, config)
        hits = [r for r in result.receipts if r.kind == "gget_hit"]
        delivers = [r for r in result.receipts if r.kind == "deliver"]
        assert len(hits) == 400 - 151
        assert len(delivers) == 151
        update = schedule.tx_cost(2) + 20000 + 5000
        assert result.total_gas == 151 * 23212 + update + 249 * 200
        assert result.decision_trace[0][0] == 0

    def test_recount_matches_ledger(self, config):
        trace = interleaved(["a", "b", "c"], 100)
        result = run(trace, config)
        assert recount(result.receipts, config.schedule) == result.total_gas
        assert result.ledger.total_ops == len(trace)

    def test_honest_runs_are_fresh(self, config):
        trace = interleaved(["a", "b", "c", "d"], 150, reads=3)
        for policy in ("grub", "memoryless", "BL1", "BL2", "offline"):
            result = run(trace, config.with_policy(policy))
            assert check_freshness(result, config)
            assert result.integrity_events == []

    def test_scan_is_served_by_range_deliver(self, config):
        result = run([Scan("a", 3)], config.with_policy("BL1"), dataset=["b", "c"])
        assert sorted(e.key for e in result.freshness_log) == ["a", "b", "c"]
        assert result.integrity_events == []
        assert "deliver" in {e.kind for e in result.events}

    def test_deterministic(self, config):
        trace = interleaved(["a", "b", "c"], 80)
        first = run(trace, config.with_policy("memoryless"))
        second = run(trace, config.with_policy("memoryless"))
        assert first.ledger_csv() == second.ledger_csv()
        assert first.events_csv() == second.events_csv()
        assert first.final_root == second.final_root

    @pytest.mark.parametrize("adversary", ["forge", "omit", "replay", "stale"])
    def test_adversaries_are_caught(self, config, adversary):
        trace = interleaved(["a", "b", "c", "d"], 200)
        cfg = SimConfig(policy=PolicySpec(PolicyKind.BL1), adversary=adversary)
        result = run(trace, cfg)
        assert result.integrity_events
        assert all(e.kind == "deliver_rejected" for e in result.integrity_events)
        assert check_freshness(result, cfg)

    def test_unknown_adversary(self, four_records):
        with pytest.raises(ConfigError):
            make_provider("sneaky", four_records.tree())

    def test_phases_label_ledger(self, config):
        trace = [Write("a")] * 60 + [Read("a")] * 60
        result = run(trace, config.with_policy("BL1"), phases=[("load", 60), ("serve", 60)])
        assert result.ledger.phases == {0: "load", 1: "serve"}
        assert result.ledger_csv(with_phase=True).splitlines()[0].endswith(",phase")

    def test_phases_must_cover_trace(self, config):
        with pytest.raises(SimulationError):
            run([Read("a")] * 10, config, phases=[("x", 5)])

    def test_steady_per_op_range(self, config):
        result = run([Read("a")] * 120, config)
        with pytest.raises(ValueError):
            result.steady_per_op(1.0)
