"""Command-line entry point: run benchmarks, sweep configurations, analyze kernels.

Exit codes: 0 success, 1 usage or parse error, 2 oracle mismatch or a
kernel that is not combinable (``analyze``), 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .bench import BENCHMARKS, SIZE_NAMES, dump_input, get, load_input
from .bench.datasets import SIZES
from .bench.harness import BenchResult, run_benchmark, sequential_time_ns
from .errors import ConfigError, KernelSyntaxError, OracleMismatch, ValidationError
from .optimizer import NotCombinable, analyze, describe, render_triple, triple_of
from .kernel import parse_kernel
from .runtime import DEFAULT_CHUNK_BYTES, RunConfig

log = logging.getLogger("mapfold")

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_CONFIG = 0, 1, 2, 3

COLUMNS = (
    "benchmark",
    "flow",
    "workers",
    "size",
    "seed",
    "t_split_ns",
    "t_map_ns",
    "t_group_ns",
    "t_reduce_ns",
    "t_total_ns",
    "pairs_emitted",
    "cells_allocated",
    "distinct_keys",
    "speedup_vs_seq",
    "speedup_combine_vs_reduce",
)
#: Columns that depend on wall-clock time and so differ between runs.
TIMING_COLUMNS = frozenset(c for c in COLUMNS if c.startswith(("t_", "speedup_")))

WORKERS_ENV = "MAPFOLD_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


# -- reporting ----------------------------------------------------------------------


def _ratio(num: float, den: float) -> str:
    return f"{num / den:.4f}" if den else ""


def report_row(result: BenchResult, seq_ns: int | None = None, combine_vs_reduce: str = "") -> dict[str, str]:
    last = result.last
    return {
        "benchmark": result.bench,
        "flow": str(result.flow),
        "workers": str(result.workers),
        "size": result.size,
        "seed": str(result.seed),
        "t_split_ns": str(result.mean_ns("t_split_ns")),
        "t_map_ns": str(result.mean_ns("t_map_ns")),
        "t_group_ns": str(result.mean_ns("t_group_ns")),
        "t_reduce_ns": str(result.mean_ns("t_reduce_ns")),
        "t_total_ns": str(result.mean_ns("t_total_ns")),
        "pairs_emitted": str(last.pairs_emitted),
        "cells_allocated": str(last.cells_allocated),
        "distinct_keys": str(last.distinct_keys),
        "speedup_vs_seq": _ratio(seq_ns, result.mean_ns()) if seq_ns else "",
        "speedup_combine_vs_reduce": combine_vs_reduce,
    }


def write_csv(rows: Iterable[dict[str, str]], out: str | None) -> None:
    """Append rows to ``out`` (header first if the file is new or empty), or print them."""
    rows = list(rows)
    if out is None:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        sys.stdout.write(buf.getvalue())
        return
    path = Path(out)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        if fresh:
            writer.writeheader()
        writer.writerows(rows)


def summary(row: dict[str, str]) -> str:
    total_ms = int(row["t_total_ns"]) / 1e6
    extra = []
    if row["speedup_vs_seq"]:
        extra.append(f"speedup_vs_seq={row['speedup_vs_seq']}")
    if row["speedup_combine_vs_reduce"]:
        extra.append(f"combine_vs_reduce={row['speedup_combine_vs_reduce']}")
    return (
        f"{row['benchmark']} size={row['size']} seed={row['seed']} workers={row['workers']} "
        f"flow={row['flow']} total={total_ms:.2f}ms pairs={row['pairs_emitted']} "
        f"cells={row['cells_allocated']} keys={row['distinct_keys']} oracle=ok"
        + ("" if not extra else " " + " ".join(extra))
    )


# -- argument helpers ---------------------------------------------------------------


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _iters(text: str) -> tuple[int, int]:
    try:
        warm, measure = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WARMUP,MEASURE, got {text!r}") from None
    return warm, measure


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _config(args: argparse.Namespace, workers: int) -> RunConfig:
    warm, measure = args.iters
    return RunConfig(workers=workers, chunk_bytes=args.chunk_bytes, seed=args.seed, warmup_iters=warm, measure_iters=measure)


def _bench_id(name: str) -> str:
    try:
        return get(name).id
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- commands -----------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    spec = get(_bench_id(args.benchmark))
    workers = args.workers if args.workers is not None else default_workers()
    config = _config(args, workers)
    data = None
    if args.input:
        clusters = SIZES["km"][args.size]["clusters"] if spec.id == "km" else None
        data = load_input(spec.id, args.input, clusters=clusters)
    reducer = spec.opaque_reducer() if args.opaque_reducer else None
    result = run_benchmark(spec, config, args.flow, args.size, args.seed, reducer=reducer, data=data)
    seq_ns = sequential_time_ns(spec, args.size, args.seed, config, data=data)
    row = report_row(result, seq_ns)
    print(summary(row), file=sys.stderr)
    write_csv([row], args.out)
    return EXIT_OK


def cmd_bench_all(args: argparse.Namespace) -> int:
    benches = [_bench_id(b) for b in args.benchmarks.split(",")] if args.benchmarks else sorted(BENCHMARKS)
    rows: list[dict[str, str]] = []
    for bench in benches:
        spec = get(bench)
        seq_ns = sequential_time_ns(spec, args.size, args.seed, _config(args, 1))
        by_flow: dict[str, list[tuple[BenchResult, str]]] = {"reduce": [], "combine": []}
        for workers in args.workers_list:
            config = _config(args, workers)
            reduce_run = run_benchmark(spec, config, "reduce", args.size, args.seed)
            combine_run = run_benchmark(spec, config, "combine", args.size, args.seed)
            ratio = _ratio(reduce_run.mean_ns(), combine_run.mean_ns())
            by_flow["reduce"].append((reduce_run, ratio))
            by_flow["combine"].append((combine_run, ratio))
        for flow in ("reduce", "combine"):
            for result, ratio in by_flow[flow]:
                row = report_row(result, seq_ns, ratio)
                print(summary(row), file=sys.stderr)
                rows.append(row)
    write_csv(rows, args.out)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        text = Path(args.kernel_file).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read {args.kernel_file}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    try:
        kernel = parse_kernel(text)
    except (KernelSyntaxError, ValidationError) as exc:
        print(f"error: {args.kernel_file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = analyze(kernel)
    print(f"{kernel.name}: {describe(result)}")
    for line in result.trace:
        print(f"  {line}")
    if isinstance(result, NotCombinable):
        print(f"failed at step {result.step}: {result.reason}: {result.detail}")
        return EXIT_MISMATCH
    if args.print_triple:
        triple = triple_of(result)
        assert triple is not None
        print(render_triple(triple), end="")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    spec = get(_bench_id(args.benchmark))
    dump_input(spec.id, spec.generate(args.size, args.seed), args.out)
    print(f"wrote {spec.id} {args.size} seed={args.seed} to {args.out}", file=sys.stderr)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, size_default: str) -> None:
    p.add_argument("--size", choices=SIZE_NAMES, default=size_default)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--chunk-bytes", type=int, default=DEFAULT_CHUNK_BYTES, help="split size in bytes")
    p.add_argument("--iters", type=_iters, default=(5, 10), metavar="W,M", help="warm-up and measured iterations")
    p.add_argument("--out", help="CSV file to append to (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapfold", description="Shared-memory MapReduce with automatic combiners.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one benchmark and check it against its oracle")
    p.add_argument("benchmark", help=f"one of {', '.join(sorted(BENCHMARKS))}")
    p.add_argument("--flow", choices=("auto", "reduce", "combine"), default="auto")
    p.add_argument("--workers", type=int, default=None, help=f"worker threads (default: ${WORKERS_ENV} or CPU count)")
    p.add_argument("--input", help="replay an input file written by 'gen' instead of generating one")
    p.add_argument("--opaque-reducer", action="store_true", help="use a host-function reducer the analyzer cannot see into")
    _add_common(p, "small")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench-all", help="sweep benchmarks x flows x worker counts")
    p.add_argument("--workers-list", type=_int_list, default=[1, 2, 4, 8], metavar="N,N,...")
    p.add_argument("--benchmarks", help="comma-separated subset (default: all seven)")
    _add_common(p, "small")
    p.set_defaults(func=cmd_bench_all)

    p = sub.add_parser("analyze", help="classify a reducer kernel file")
    p.add_argument("kernel_file")
    p.add_argument("--print-triple", action="store_true", help="print the derived initialize/combine/finalize")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen", help="write a benchmark input to a file")
    p.add_argument("benchmark")
    p.add_argument("--size", choices=SIZE_NAMES, default="small")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
