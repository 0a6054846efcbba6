"""Experiment specs: INI files naming a workload, a simulator setup and policies.

Example spec::

    [experiment]
    name = eth-feed
    seed = 7

    [workload]
    kind = price_feed
    write_count = 2000

    [sim]
    epoch_len = 60

    [gas]
    update_per_word = 5000

    [policy:grub]
    [policy:mem2]
    kind = memoryless
    k = 2
"""

from __future__ import annotations

import configparser
import csv
import io
import re
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

from .core import Key, Trace, parse_trace
from .errors import ConfigError
from .gas_model import GasSchedule
from .logging_config import get_logger
from .sim import PolicyKind, PolicySpec, SimConfig, SimResult, run
from .workers import SimulationWorker, run_workers
from .workloads import (
    DEFAULT_PRELOAD,
    DISTRIBUTIONS,
    MIX_KEY_COUNT,
    MixPhaseSpec,
    RatioSpec,
    ReadsPerWriteDistribution,
    YcsbPhase,
    btc_relay_workload,
    dataset_keys,
    gen_from_distribution,
    gen_ratio,
    gen_ycsb_mix,
    price_feed_workload,
    ycsb_mix,
)

logger = get_logger(__name__)

SUMMARY_COLUMNS = ("policy", "total_gas", "per_op_gas", "savings_vs_BL1", "savings_vs_BL2")
SWEEP_COLUMNS = ("parameter", "value", "policy", "total_gas", "per_op_gas")
SWEEP_PARAMETERS = ("ratio", "k", "record_words", "data_size")
WORKLOAD_KINDS = ("ratio", "ycsb", "distribution", "price_feed", "btc_relay", "trace")

_SIM_INT_FIELDS = ("epoch_len", "block_time", "finality_blocks", "propagation_delay", "record_words")


class Workload(NamedTuple):
    trace: Trace
    dataset: list[Key]
    phases: list[tuple[str, int]] | None


@dataclass(frozen=True)
class ExperimentSpec:
    """A parsed experiment file.

    Attributes:
        name: Experiment name; also the run-index key and output subfolder.
        workload: Raw ``[workload]`` options.
        config: Simulator setup; its policy is replaced per run.
        policies: ``(label, policy)`` in file order.
        seed: Seed for workload generation and the simulator.
        output: Output directory from the file, if any.
        workers: Thread-pool size for fanning out runs.
        base_dir: Directory relative paths resolve against.
    """

    name: str
    workload: dict[str, str]
    config: SimConfig
    policies: list[tuple[str, PolicySpec]]
    seed: int = 0
    output: str | None = None
    workers: int = 1
    base_dir: Path = field(default_factory=Path.cwd)

    def with_policies(self, names: Sequence[str]) -> ExperimentSpec:
        return replace(self, policies=[(n, PolicySpec.parse(n)) for n in names])

    def with_seed(self, seed: int) -> ExperimentSpec:
        return replace(self, seed=seed, config=replace(self.config, rng_seed=seed))


def _get_int(section: configparser.SectionProxy, option: str, default: int) -> int:
    try:
        return section.getint(option, fallback=default)
    except ValueError:
        raise ConfigError(f"[{section.name}] {option} must be an integer") from None


def parse_spec(text: str, base_dir: Path | None = None) -> ExperimentSpec:
    """Parse the INI text of an experiment spec.

    Raises:
        ConfigError: on a missing section, bad value or empty policy list.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"unreadable spec: {e}") from None

    if not parser.has_section("experiment"):
        raise ConfigError("spec needs an [experiment] section")
    exp = parser["experiment"]
    seed = _get_int(exp, "seed", 0)

    if not parser.has_section("workload"):
        raise ConfigError("spec needs a [workload] section")
    workload = dict(parser["workload"])
    kind = workload.get("kind", "trace" if "trace" in workload else "")
    if kind not in WORKLOAD_KINDS:
        raise ConfigError(f"workload kind must be one of {WORKLOAD_KINDS}, got {kind!r}")
    workload["kind"] = kind

    schedule = GasSchedule()
    if parser.has_section("gas"):
        overrides = {name: _get_int(parser["gas"], name, 0) for name in parser["gas"]}
        try:
            schedule = schedule.with_overrides(**overrides)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    sim_kwargs: dict = {}
    if parser.has_section("sim"):
        sim = parser["sim"]
        for name in _SIM_INT_FIELDS:
            if name in sim:
                sim_kwargs[name] = _get_int(sim, name, 0)
        if "digest_every_epoch" in sim:
            sim_kwargs["digest_every_epoch"] = sim.getboolean("digest_every_epoch")
        if "adversary" in sim:
            sim_kwargs["adversary"] = sim["adversary"].strip()
    config = SimConfig(schedule=schedule, rng_seed=seed, **sim_kwargs)

    policies: list[tuple[str, PolicySpec]] = []
    for section in parser.sections():
        if not section.startswith("policy:"):
            continue
        label = section.split(":", 1)[1].strip()
        opts = parser[section]
        params = ",".join(f"{k}={opts[k]}" for k in ("k", "d", "window") if k in opts)
        text_spec = opts.get("kind", label) + (f":{params}" if params else "")
        policies.append((label, PolicySpec.parse(text_spec)))
    if not policies:
        raise ConfigError("spec lists no policies")

    return ExperimentSpec(
        name=exp.get("name", "experiment").strip(),
        workload=workload,
        config=config,
        policies=policies,
        seed=seed,
        output=exp.get("output"),
        workers=_get_int(exp, "workers", 1),
        base_dir=base_dir or Path.cwd(),
    )


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read spec {path}: {e.strerror or e}") from None
    return parse_spec(text, path.parent)


def _number(options: dict[str, str], name: str, default: float | int, cast=int):
    raw = options.get(name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[workload] {name} must be a number, got {raw!r}") from None


def resolve_workload(spec: ExperimentSpec) -> Workload:
    """Build the trace (and preloaded dataset) an experiment describes."""
    w = spec.workload
    kind = w["kind"]
    seed = spec.seed
    words = _number(w, "record_words", 1)
    preload = _number(w, "preload", 0)
    phases = None
    try:
        if kind == "ratio":
            trace = gen_ratio(
                RatioSpec(
                    _number(w, "reads_per_write", 1.0, float),
                    _number(w, "total_ops", 1000),
                    _number(w, "key_count", 1),
                    words,
                ),
                seed,
            )
        elif kind == "ycsb":
            op_count = _number(w, "op_count", 4096)
            key_count = _number(w, "key_count", MIX_KEY_COUNT if "mix" in w else 1024)
            dist = w.get("distribution", "zipfian")
            if "mix" in w:
                mix = ycsb_mix(
                    w["mix"].replace(" ", ""),
                    op_count,
                    key_count,
                    _number(w, "record_words", 0) or None,
                    dist,
                )
            else:
                mix = MixPhaseSpec(
                    (YcsbPhase(w.get("phase", "A"), op_count, dist, words, key_count),)
                )
            trace, phases = gen_ycsb_mix(mix, seed)
            preload = _number(w, "preload", max(DEFAULT_PRELOAD, key_count))
        elif kind == "distribution":
            table = w.get("table", "ethPriceOracle")
            dist_obj = DISTRIBUTIONS.get(table)
            if dist_obj is None:
                dist_obj = ReadsPerWriteDistribution.from_csv(spec.base_dir / table)
            trace = gen_from_distribution(
                dist_obj, _number(w, "write_count", 1000), seed, words=words
            )
        elif kind == "price_feed":
            trace = price_feed_workload(
                _number(w, "write_count", 1000),
                seed,
                _number(w, "asset_count", 4096),
                _number(w, "batch_size", 10),
                words,
            )
        elif kind == "btc_relay":
            trace = btc_relay_workload(_number(w, "write_count", 1000), seed, words)
        else:
            path = spec.base_dir / w["trace"]
            with open(path, encoding="utf-8") as fh:
                trace = parse_trace(fh)
    except KeyError as e:
        raise ConfigError(f"[workload] missing option {e}") from None
    return Workload(trace, dataset_keys(preload), phases)


# -- running ------------------------------------------------------------------


def run_policies(
    spec: ExperimentSpec,
    workload: Workload | None = None,
    include_baselines: bool = True,
) -> list[tuple[str, SimResult]]:
    """Run every policy of ``spec`` on the same workload.

    BL1 and BL2 are added when missing so savings can be computed.
    """
    workload = workload or resolve_workload(spec)
    policies = list(spec.policies)
    if include_baselines:
        kinds = {p.kind for _, p in policies}
        for kind in (PolicyKind.BL1, PolicyKind.BL2):
            if kind not in kinds:
                policies.append((kind.value, PolicySpec(kind)))

    def task(policy: PolicySpec):
        config = replace(spec.config, policy=policy)
        return lambda: run(workload.trace, config, workload.dataset, workload.phases)

    workers = [SimulationWorker(label, task(policy)) for label, policy in policies]
    results = run_workers(workers, spec.workers)
    logger.info("%s: ran %d policies over %d ops", spec.name, len(policies), len(workload.trace))
    return [(label, r) for (label, _), r in zip(policies, results) if r is not None]


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    total_gas: int
    per_op_gas: float
    savings_vs_BL1: float | None
    savings_vs_BL2: float | None


def _savings(baseline: int | None, total: int) -> float | None:
    if not baseline:
        return None
    return (baseline - total) / baseline


def summarize(results: Sequence[tuple[str, SimResult]]) -> list[SummaryRow]:
    totals = {r.policy_name: r.total_gas for _, r in results}
    bl1 = totals.get("BL1")
    bl2 = totals.get("BL2")
    return [
        SummaryRow(
            label,
            r.total_gas,
            r.per_op_gas,
            _savings(bl1, r.total_gas),
            _savings(bl2, r.total_gas),
        )
        for label, r in results
    ]


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.4f}"


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.policy,
                row.total_gas,
                _fmt(row.per_op_gas),
                _fmt(row.savings_vs_BL1),
                _fmt(row.savings_vs_BL2),
            ]
        )
    return buf.getvalue()


def safe_label(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label).strip("_") or "policy"


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    policy: str
    total_gas: int
    per_op_gas: float


def parse_values(text: str) -> list[float]:
    """``"0,1,2.5"`` or an inclusive ``"start:stop[:step]"`` range."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1.0
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return [start + i * step for i in range(count)]
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad sweep range {text!r}") from None
    if not values:
        raise ConfigError("empty sweep range")
    return values


def _as_int(value: float, parameter: str) -> int:
    if value != int(value) or value < 1:
        raise ConfigError(f"{parameter} values must be positive integers, got {value}")
    return int(value)


def _swept(spec: ExperimentSpec, parameter: str, value: float) -> ExperimentSpec:
    workload = dict(spec.workload)
    if parameter == "ratio":
        workload["kind"] = "ratio"
        workload["reads_per_write"] = repr(value)
        return replace(spec, workload=workload)
    if parameter == "record_words":
        workload["record_words"] = str(_as_int(value, parameter))
        return replace(spec, workload=workload)
    if parameter == "data_size":
        size = _as_int(value, parameter)
        workload["preload"] = str(size)
        if workload.get("kind") in ("ratio", "ycsb"):
            workload["key_count"] = str(size)
        return replace(spec, workload=workload)
    if parameter == "k":
        k = _as_int(value, parameter)
        policies = [
            (label, replace(p, k=k) if p.kind in (
                PolicyKind.MEMORYLESS,
                PolicyKind.MEMORIZING,
                PolicyKind.ADAPTIVE_K1,
                PolicyKind.ADAPTIVE_K2,
            ) else p)
            for label, p in spec.policies
        ]
        return replace(spec, policies=policies)
    raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")


def sweep(spec: ExperimentSpec, parameter: str, values: Sequence[float]) -> list[SweepRow]:
    """One row per (value, policy), in value order then policy order."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    rows: list[SweepRow] = []
    for value in values:
        for label, result in run_policies(_swept(spec, parameter, value)):
            rows.append(SweepRow(parameter, value, label, result.total_gas, result.per_op_gas))
    return rows


def crossover(rows: Sequence[SweepRow]) -> float | None:
    """First swept value at which BL2 costs no more per op than BL1."""
    per_value: dict[float, dict[str, float]] = {}
    for row in rows:
        per_value.setdefault(row.value, {})[row.policy] = row.per_op_gas
    for value in sorted(per_value):
        costs = per_value[value]
        if "BL1" in costs and "BL2" in costs and costs["BL2"] <= costs["BL1"]:
            return value
    return None


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(
            [row.parameter, f"{row.value:g}", row.policy, row.total_gas, _fmt(row.per_op_gas)]
        )
    return buf.getvalue()


__all__ = [
    "ExperimentSpec",
    "SummaryRow",
    "SweepRow",
    "Workload",
    "crossover",
    "load_spec",
    "parse_spec",
    "parse_values",
    "resolve_workload",
    "run_policies",
    "safe_label",
    "summarize",
    "summary_csv",
    "sweep",
    "sweep_csv",
]
