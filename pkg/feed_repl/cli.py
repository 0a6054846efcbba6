"""Command-line entry point: ``feedrepl run|sweep|verify|gen``.

Exit codes: 0 success, 1 bad input or an aborted run (any feed_repl error
or a file error), 2 a verify property failed.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from dotenv import load_dotenv

from . import __version__, store
from .core import serialize_trace
from .errors import FeedReplError
from .experiment import (
    SWEEP_PARAMETERS,
    ExperimentSpec,
    crossover,
    load_spec,
    parse_values,
    resolve_workload,
    run_policies,
    safe_label,
    summarize,
    summary_csv,
    sweep,
    sweep_csv,
)
from .logging_config import configure_logging, get_logger
from .verify import run_suite

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PROPERTY = 2


def _load(args: argparse.Namespace) -> ExperimentSpec:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    if args.policy:
        spec = spec.with_policies(args.policy)
    return spec


def _out_dir(args: argparse.Namespace, spec: ExperimentSpec) -> Path:
    base = store.output_dir(args.out or spec.output)
    out = base / safe_label(spec.name)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    logger.debug("wrote %s", path)


def cmd_run(args: argparse.Namespace) -> int:
    spec = _load(args)
    workload = resolve_workload(spec)
    results = run_policies(spec, workload)
    out = _out_dir(args, spec)
    with_phase = workload.phases is not None
    for label, result in results:
        name = safe_label(label)
        _write(out / f"ledger_{name}.csv", result.ledger_csv(with_phase))
        _write(out / f"decisions_{name}.csv", result.decisions_csv())
        if args.events:
            _write(out / f"events_{name}.csv", result.events_csv())
    rows = summarize(results)
    table = summary_csv(rows)
    _write(out / "summary.csv", table)
    store.set_record(
        out.parent,
        spec.name,
        {
            "seed": spec.seed,
            "ops": len(workload.trace),
            "totals": {r.policy: r.total_gas for r in rows},
        },
    )
    print(table, end="")
    print(f"Results written to {out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = _load(args)
    values = parse_values(args.range)
    rows = sweep(spec, args.param, values)
    out = _out_dir(args, spec)
    table = sweep_csv(rows)
    _write(out / f"sweep_{args.param}.csv", table)
    print(table, end="")
    record: dict = {"seed": spec.seed, "param": args.param, "values": values}
    if args.param == "ratio":
        point = crossover(rows)
        text = "none" if point is None else f"{point:g}"
        _write(out / "crossover.csv", f"crossover_ratio\n{text}\n")
        print(f"BL1/BL2 crossover ratio: {text}")
        record["crossover"] = point
    store.set_record(out.parent, f"{spec.name}:sweep_{args.param}", record)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    results = run_suite(seed=seed, runs=args.runs, mutate=args.mutate, full=args.full)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed (seed={seed})")
    return EXIT_PROPERTY if failed else EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = _load(args)
    trace = resolve_workload(spec).trace
    text = serialize_trace(trace)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        _write(path, text)
        print(f"Wrote {len(trace)} operations to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedrepl",
        description="Simulate workload-adaptive replication of an off-chain data feed",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default: INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--spec", required=True, help="Experiment spec (INI)")
        p.add_argument("--seed", type=int, default=None, help="Override the spec's seed")
        p.add_argument(
            "--policy",
            action="append",
            default=[],
            help="Policy to run, e.g. grub or memoryless:k=2 (repeatable)",
        )

    p_run = sub.add_parser("run", help="Run every policy of a spec on its workload")
    common(p_run)
    p_run.add_argument("--out", default=None, help="Output directory")
    p_run.add_argument("--events", action="store_true", help="Also export event logs")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="Sweep one parameter over a range")
    common(p_sweep)
    p_sweep.add_argument("--out", default=None, help="Output directory")
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    p_sweep.add_argument(
        "--range", required=True, help='Values: "0,1,2" or inclusive "start:stop[:step]"'
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="Run the property suite")
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--runs", type=int, default=50, help="Seeded freshness runs")
    p_verify.add_argument(
        "--mutate",
        action="store_true",
        help="Use a memoryless policy that keeps its read counter across writes",
    )
    p_verify.add_argument("--full", action="store_true", help="Include mixed YCSB runs")
    p_verify.set_defaults(func=cmd_verify)

    p_gen = sub.add_parser("gen", help="Write a spec's workload as a trace file")
    common(p_gen)
    p_gen.add_argument("--out", default=None, help="Trace file (default: stdout)")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except (FeedReplError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
