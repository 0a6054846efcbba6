"""Property suite behind ``feedrepl verify``.

Each check returns a :class:`PropertyResult`; a failure carries the seed
that reproduces it. ``run_suite(mutate=True)`` swaps in a memoryless policy
that never resets its read counter, which the competitiveness check must
catch.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .ads import (
    FourRecordFixture,
    MembershipProof,
    RangeProof,
    leaf_digest,
    node_digest,
    prove_key,
    prove_range,
    verify_membership,
    verify_range,
)
from .core import Read, ReplState, Trace, Write
from .decision import (
    MemorizingPolicy,
    MemorylessPolicy,
    OpCosts,
    brute_force_optimal,
    eager_replication_trace,
    memorizing_bound,
    offline_optimal,
    online_cost,
    worst_case_memorizing,
    worst_case_memoryless,
)
from .errors import FeedReplError
from .gas_model import (
    DEFAULT_SCHEDULE,
    GasSchedule,
    default_k,
    hash_cost,
    insert_cost,
    read_cost,
    tx_cost,
    update_cost,
)
from .logging_config import get_logger
from .sim import SimConfig, SimResult, check_freshness, per_record_costs, recount, run
from .workloads import (
    ETH_PRICE_ORACLE,
    RatioSpec,
    YcsbPhase,
    dataset_keys,
    gen_from_distribution,
    gen_ratio,
    gen_ycsb_mix,
    gen_ycsb_phase,
    ycsb_mix,
)

logger = get_logger(__name__)

CROSSOVER_RATIOS = tuple(range(9))
CONVERGED_RATIOS = (0, 1, 2, 4, 8, 256)
CONVERGED_SLACK = 1.25
MIN_MIX_SAVINGS = 0.05
ADVERSARIES = ("forge", "omit", "replay", "stale")


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str = ""
    seed: int | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}"
        if self.detail:
            text += f"  {self.detail}"
        if not self.passed and self.seed is not None:
            text += f"  (seed={self.seed})"
        return text


# -- gas and decision level ---------------------------------------------------


def check_gas_schedule(schedule: GasSchedule = DEFAULT_SCHEDULE) -> PropertyResult:
    expected = {
        "tx_cost": (tx_cost(1, schedule), 23176),
        "insert_cost": (insert_cost(1, schedule), 20000),
        "update_cost": (update_cost(1, schedule), 5000),
        "read_cost": (read_cost(1, schedule), 200),
        "hash_cost": (hash_cost(1, schedule), 36),
    }
    wrong = [f"{n}(1)={got}, want {want}" for n, (got, want) in expected.items() if got != want]
    return PropertyResult("gas_schedule", not wrong, "; ".join(wrong) or "one-word prices exact")


def _competitive(
    name: str,
    cases: Sequence[tuple[str, Trace, OpCosts]],
    make_policy: Callable[[], object],
    bound: Callable[[OpCosts], float],
    schedule: GasSchedule,
) -> PropertyResult:
    worst_ratio = 0.0
    worst_label = ""
    for label, trace, costs in cases:
        online = online_cost(trace, make_policy(), costs)
        opt = offline_optimal(trace, schedule, costs).total
        ratio = online / opt if opt else float("inf")
        if ratio > worst_ratio:
            worst_ratio, worst_label = ratio, label
        if online > bound(costs) * opt + schedule.tx_base:
            return PropertyResult(
                name,
                False,
                f"{label}: online {online} > bound over optimum {opt} (ratio {ratio:.3f})",
            )
    return PropertyResult(name, True, f"max ratio {worst_ratio:.3f} on {worst_label}")


def check_memoryless_competitive(
    schedule: GasSchedule = DEFAULT_SCHEDULE, mutate: bool = False, repetitions: int = 50
) -> PropertyResult:
    """Memoryless gas <= 2 x optimum + tx_base on its adversarial traces.

    With ``mutate`` the policy keeps its read counter across writes.
    """
    k = default_k(schedule)
    costs = per_record_costs(schedule)
    cases = [
        (f"worst_case_memoryless(k={k}, n={n})", worst_case_memoryless(k, n), costs)
        for n in range(1, repetitions + 1)
    ]
    cases.append(
        (
            f"eager_replication_trace(k={k}, n={repetitions})",
            eager_replication_trace(k, repetitions),
            per_record_costs(schedule, writes_per_epoch=20),
        )
    )
    name = "memoryless_competitive" + ("[mutated]" if mutate else "")
    return _competitive(
        name,
        cases,
        lambda: MemorylessPolicy(k, reset_on_write=not mutate),
        lambda _c: 2.0,
        schedule,
    )


def check_memorizing_competitive(
    schedule: GasSchedule = DEFAULT_SCHEDULE,
    params: Sequence[tuple[int, int]] = ((2, 1), (8, 1), (4, 2)),
    repetitions: int = 30,
) -> PropertyResult:
    costs = per_record_costs(schedule)
    results = []
    for k_prime, d in params:
        cases = [
            (
                f"worst_case_memorizing(K'={k_prime}, D={d}, n={n})",
                worst_case_memorizing(k_prime, d, n),
                costs,
            )
            for n in range(1, repetitions + 1)
        ]
        results.append(
            _competitive(
                "memorizing_competitive",
                cases,
                lambda k_prime=k_prime, d=d: MemorizingPolicy(k_prime, d),
                lambda c, k_prime=k_prime, d=d: memorizing_bound(k_prime, d, c),
                schedule,
            )
        )
    failed = [r for r in results if not r.passed]
    if failed:
        return failed[0]
    return PropertyResult(
        "memorizing_competitive", True, "; ".join(r.detail for r in results)
    )


def random_small_trace(rng: np.random.Generator, max_len: int = 12, keys: str = "abc") -> Trace:
    length = int(rng.integers(1, max_len + 1))
    trace: Trace = []
    for _ in range(length):
        key = keys[int(rng.integers(len(keys)))]
        trace.append(Write(key, 1) if rng.random() < 0.5 else Read(key))
    return trace


def check_oracle_soundness(
    seed: int = 0, count: int = 200, schedule: GasSchedule = DEFAULT_SCHEDULE
) -> PropertyResult:
    """The dynamic program matches exhaustive enumeration exactly."""
    for i in range(count):
        case_seed = seed * 1000 + i
        rng = np.random.default_rng(case_seed)
        trace = random_small_trace(rng)
        costs = per_record_costs(schedule, writes_per_epoch=int(rng.integers(1, 21)))
        dp = offline_optimal(trace, schedule, costs).total
        brute = brute_force_optimal(trace, costs)
        if dp != brute:
            return PropertyResult(
                "oracle_soundness", False, f"dp {dp} != exhaustive {brute}", case_seed
            )
    return PropertyResult("oracle_soundness", True, f"{count} random traces agree")


# -- authenticated structure --------------------------------------------------


def _flip_bit(data: bytes, bit: int) -> bytes:
    buf = bytearray(data)
    buf[bit // 8] ^= 1 << (7 - bit % 8)
    return bytes(buf)


def check_ads_tamper(seed: int = 0, substitutions: int = 20) -> PropertyResult:
    """Bit flips, sibling swaps and range omissions on the fixture are rejected."""
    tree = FourRecordFixture.create().tree()
    root = tree.root
    proof = prove_key(tree, "w", ReplState.NR)
    assert isinstance(proof, MembershipProof)
    w, y, x, z = (tree.find(k, s) for k, s in (
        ("w", ReplState.NR), ("y", ReplState.NR), ("x", ReplState.R), ("z", ReplState.R)
    ))
    expected_siblings = (leaf_digest(y), node_digest(leaf_digest(x), leaf_digest(z)))
    if proof.siblings != expected_siblings:
        return PropertyResult("ads_tamper", False, "membership siblings of w are not (y, xz)")
    if not verify_membership(root, w, proof):
        return PropertyResult("ads_tamper", False, "honest proof of w rejected")

    for bit in range(len(w.value) * 8):
        forged = w.with_value(_flip_bit(w.value, bit))
        if verify_membership(root, forged, replace(proof, record=forged)):
            return PropertyResult("ads_tamper", False, f"value bit {bit} flip accepted")

    rng = np.random.default_rng(seed)
    for level in range(len(proof.siblings)):
        for _ in range(substitutions):
            siblings = list(proof.siblings)
            siblings[level] = rng.bytes(32)
            if verify_membership(root, w, replace(proof, siblings=tuple(siblings))):
                return PropertyResult(
                    "ads_tamper", False, f"sibling substitution at level {level} accepted", seed
                )

    full = prove_range(tree, "w", "y")
    if not verify_range(root, ("w", "y"), full):
        return PropertyResult("ads_tamper", False, "honest range proof rejected")
    omitted = RangeProof(full.state, full.start_key, full.end_key, full.records[:1], full.shape)
    if verify_range(root, ("w", "y"), omitted):
        return PropertyResult("ads_tamper", False, "range omission accepted")

    flips = len(w.value) * 8
    return PropertyResult(
        "ads_tamper",
        True,
        f"{flips} bit flips, {substitutions * len(proof.siblings)} substitutions, omission rejected",
    )


# -- simulation level ---------------------------------------------------------


def _small_workload(seed: int) -> Trace:
    return gen_ycsb_phase(YcsbPhase("A", 300, "uniform", 1, 16), seed)


def check_freshness_honest(seed: int = 0, runs: int = 50) -> PropertyResult:
    """Honest runs are fresh, integrity-clean and gas-conserving."""
    policies = ("grub", "memoryless", "BL1", "BL2")
    for i in range(runs):
        run_seed = seed + i
        config = SimConfig(rng_seed=run_seed).with_policy(policies[i % len(policies)])
        result = run(_small_workload(run_seed), config)
        if result.integrity_events:
            return PropertyResult(
                "freshness_honest", False, "honest provider flagged", run_seed
            )
        if not check_freshness(result, config):
            return PropertyResult(
                "freshness_honest", False, f"stale read under {result.policy_name}", run_seed
            )
        if recount(result.receipts, config.schedule) != result.total_gas:
            return PropertyResult(
                "freshness_honest", False, "ledger total differs from receipts", run_seed
            )
    return PropertyResult("freshness_honest", True, f"{runs} seeded runs")


def check_adversaries(seed: int = 0) -> PropertyResult:
    """Every scripted provider is caught; answers that were accepted stay fresh."""
    trace = gen_ratio(RatioSpec(2, 600, 4), seed)
    caught = []
    for name in ADVERSARIES:
        config = replace(SimConfig(rng_seed=seed), adversary=name).with_policy("BL1")
        result = run(trace, config)
        if not result.integrity_events:
            return PropertyResult("adversaries", False, f"{name} provider never rejected", seed)
        if not check_freshness(result, config):
            return PropertyResult("adversaries", False, f"{name} provider served stale data", seed)
        caught.append(f"{name}={len(result.integrity_events)}")
    return PropertyResult("adversaries", True, "rejected " + ", ".join(caught))


def check_determinism(seed: int = 0) -> PropertyResult:
    config = SimConfig(rng_seed=seed)
    trace = _small_workload(seed)
    first, second = run(trace, config), run(trace, config)
    same = (
        first.ledger_csv() == second.ledger_csv()
        and first.decisions_csv() == second.decisions_csv()
        and first.events_csv() == second.events_csv()
    )
    return PropertyResult("determinism", same, "repeat run byte-identical" if same else "", seed)


def _ratio_ops(ratio: float) -> int:
    return max(1200, int((ratio + 1) * 40))


def _per_op(ratio: float, policy: str, seed: int, steady: bool = False) -> float:
    trace = gen_ratio(RatioSpec(ratio, _ratio_ops(ratio)), seed)
    result = run(trace, SimConfig(rng_seed=seed).with_policy(policy))
    return result.steady_per_op() if steady else result.per_op_gas


def check_crossover(seed: int = 0) -> PropertyResult:
    costs = {r: (_per_op(r, "BL1", seed), _per_op(r, "BL2", seed)) for r in CROSSOVER_RATIOS}
    bl1_0, bl2_0 = costs[0]
    bl1_8, bl2_8 = costs[8]
    point = next((r for r in CROSSOVER_RATIOS if costs[r][1] <= costs[r][0]), None)
    ok = bl1_0 < bl2_0 and bl2_8 < bl1_8 and point is not None and 1 <= point <= 3
    return PropertyResult("crossover", ok, f"BL2 <= BL1 from ratio {point}", seed)


def check_extremes(seed: int = 0) -> PropertyResult:
    bl1_0, bl2_0 = _per_op(0, "BL1", seed), _per_op(0, "BL2", seed)
    bl1_h, bl2_h = _per_op(256, "BL1", seed), _per_op(256, "BL2", seed)
    low, high = bl2_0 / bl1_0, bl1_h / bl2_h
    return PropertyResult(
        "extreme_ratios",
        low >= 10 and high >= 3,
        f"BL2/BL1 at 0 = {low:.1f}, BL1/BL2 at 256 = {high:.1f}",
        seed,
    )


def check_converged(seed: int = 0) -> PropertyResult:
    """Compares per-op gas after the warm-up epochs."""
    worst = 0.0
    for ratio in CONVERGED_RATIOS:
        best = min(_per_op(ratio, "BL1", seed, True), _per_op(ratio, "BL2", seed, True))
        rel = _per_op(ratio, "grub", seed, True) / best
        worst = max(worst, rel)
        if rel > CONVERGED_SLACK:
            return PropertyResult(
                "converged", False, f"ratio {ratio}: {rel:.3f} x best baseline", seed
            )
    return PropertyResult("converged", True, f"within {worst:.3f} x best baseline")


def check_adaptive(seed: int = 0, write_count: int = 200) -> PropertyResult:
    trace = gen_from_distribution(ETH_PRICE_ORACLE, write_count, seed)
    totals = []
    for name in ("memoryless", "K1", "K2"):
        config = SimConfig(rng_seed=seed).with_policy(name)
        first, second = run(trace, config), run(trace, config)
        if first.ledger_csv() != second.ledger_csv():
            return PropertyResult("adaptive_k", False, f"{name} not deterministic", seed)
        totals.append(f"{name}={first.total_gas}")
    return PropertyResult("adaptive_k", True, ", ".join(totals))


def mixed_ycsb_savings(mix: str, seed: int = 0, op_count: int = 4096) -> dict[str, SimResult]:
    trace, phases = gen_ycsb_mix(ycsb_mix(mix, op_count), seed)
    dataset = dataset_keys(2**16)
    return {
        name: run(trace, SimConfig(rng_seed=seed).with_policy(name), dataset, phases)
        for name in ("grub", "BL1", "BL2")
    }


def check_mixed_ycsb(seed: int = 0) -> PropertyResult:
    parts = []
    ok = True
    for mix in ("A,B", "A,E", "A,F"):
        res = mixed_ycsb_savings(mix, seed)
        adaptive = res["grub"].total_gas
        s1 = (res["BL1"].total_gas - adaptive) / res["BL1"].total_gas
        s2 = (res["BL2"].total_gas - adaptive) / res["BL2"].total_gas
        ok = ok and s1 >= MIN_MIX_SAVINGS and s2 >= MIN_MIX_SAVINGS
        parts.append(f"{mix}: {s1:.1%} vs BL1, {s2:.1%} vs BL2")
    return PropertyResult("mixed_ycsb", ok, "; ".join(parts), seed)


# -- suite --------------------------------------------------------------------


def run_suite(
    seed: int = 0, runs: int = 50, mutate: bool = False, full: bool = False
) -> list[PropertyResult]:
    """Run every property; ``full`` adds the slow mixed-YCSB report."""
    checks: list[tuple[str, Callable[[], PropertyResult]]] = [
        ("gas_schedule", check_gas_schedule),
        ("memoryless_competitive", lambda: check_memoryless_competitive(mutate=mutate)),
        ("memorizing_competitive", check_memorizing_competitive),
        ("oracle_soundness", lambda: check_oracle_soundness(seed)),
        ("ads_tamper", lambda: check_ads_tamper(seed)),
        ("freshness_honest", lambda: check_freshness_honest(seed, runs)),
        ("adversaries", lambda: check_adversaries(seed)),
        ("determinism", lambda: check_determinism(seed)),
        ("crossover", lambda: check_crossover(seed)),
        ("extreme_ratios", lambda: check_extremes(seed)),
        ("converged", lambda: check_converged(seed)),
        ("adaptive_k", lambda: check_adaptive(seed)),
    ]
    if full:
        checks.append(("mixed_ycsb", lambda: check_mixed_ycsb(seed)))

    results = []
    for name, check in checks:
        try:
            result = check()
        except FeedReplError as e:
            result = PropertyResult(name, False, f"raised {type(e).__name__}: {e}", seed)
        logger.info(result.line())
        results.append(result)
    return results
