"""Timed, oracle-checked benchmark runs."""
from __future__ import annotations

import functools
import statistics
import time
from dataclasses import dataclass, field
from typing import Any

from ..errors import OracleMismatch
from ..runtime import Flow, FlowMode, Job, RunConfig, RunMetrics, run, run_baseline_sequential
from ..store import StoreStats
from ..values import canonical, results_close
from .suite import BenchmarkSpec

PHASES = ("t_split_ns", "t_map_ns", "t_group_ns", "t_reduce_ns")

#: Relative tolerance for Float results against the oracle.
FLOAT_REL = 1e-9


@dataclass
class IterationMetrics:
    """One execution of a benchmark; multi-job benchmarks sum their jobs."""

    flow: Flow
    t_split_ns: int = 0
    t_map_ns: int = 0
    t_group_ns: int = 0
    t_reduce_ns: int = 0
    pairs_emitted: int = 0
    cells_allocated: int = 0
    distinct_keys: int = 0
    task_local_holders: int = 0
    jobs: int = 0

    @property
    def t_total_ns(self) -> int:
        return self.t_split_ns + self.t_map_ns + self.t_group_ns + self.t_reduce_ns

    def add(self, m: RunMetrics) -> None:
        self.flow = m.flow
        self.t_split_ns += m.t_split_ns
        self.t_map_ns += m.t_map_ns
        self.t_group_ns += m.t_group_ns
        self.t_reduce_ns += m.t_reduce_ns
        s: StoreStats = m.stats
        self.pairs_emitted += s.pairs_emitted
        self.cells_allocated += s.cells_allocated
        self.distinct_keys += s.distinct_keys
        self.task_local_holders += s.task_local_holders
        self.jobs += 1

    def counters(self) -> tuple[int, int, int]:
        return (self.pairs_emitted, self.cells_allocated, self.distinct_keys)


@dataclass
class BenchResult:
    bench: str
    size: str
    seed: int
    workers: int
    flow: Flow
    results: list
    iterations: list[IterationMetrics] = field(default_factory=list)

    def mean_ns(self, phase: str = "t_total_ns") -> int:
        return round(statistics.fmean(getattr(m, phase) for m in self.iterations))

    def min_ns(self, phase: str = "t_total_ns") -> int:
        return min(getattr(m, phase) for m in self.iterations)

    @property
    def last(self) -> IterationMetrics:
        return self.iterations[-1]


@functools.lru_cache(maxsize=32)
def _cached_input(spec: BenchmarkSpec, size: str, seed: int) -> Any:
    return spec.generate(size, seed)


@functools.lru_cache(maxsize=32)
def _cached_oracle(spec: BenchmarkSpec, size: str, seed: int) -> list:
    return canonical(spec.oracle(_cached_input(spec, size, seed)))


def load(spec: BenchmarkSpec, size: str, seed: int, data: Any = None) -> tuple[Any, list]:
    """Input and oracle answer.

    Generated inputs and their answers are memoised per ``(spec, size, seed)``;
    an explicit ``data`` (e.g. read from a file) is used as is.
    """
    if data is not None:
        return data, canonical(spec.oracle(data))
    return _cached_input(spec, size, seed), _cached_oracle(spec, size, seed)


def execute_once(
    spec: BenchmarkSpec,
    data: Any,
    config: RunConfig,
    flow: FlowMode | str = FlowMode.AUTO,
    reducer: Any = None,
) -> tuple[list, IterationMetrics]:
    """Run every job of ``spec`` once on the parallel runtime."""
    mode = FlowMode(flow) if isinstance(flow, str) else flow
    reducer = spec.kernel if reducer is None else reducer
    metrics = IterationMetrics(flow=Flow.REDUCE)

    def runner(mapper, red, items):
        results, m = run(Job(mapper, red, mode), items, config)
        metrics.add(m)
        return results

    results = canonical(spec.execute(data, runner, reducer))
    return results, metrics


def check(spec: BenchmarkSpec, got: list, want: list) -> None:
    if not results_close(got, want, rel=FLOAT_REL):
        detail = _first_difference(got, want)
        raise OracleMismatch(f"{spec.id}: results differ from the oracle ({detail})")


def _first_difference(got: list, want: list) -> str:
    if len(got) != len(want):
        return f"{len(got)} keys vs {len(want)} expected"
    for g, w in zip(got, want):
        if not results_close([g], [w], rel=FLOAT_REL):
            return f"got {g!r}, expected {w!r}"
    return "no difference found"  # pragma: no cover


def run_benchmark(
    spec: BenchmarkSpec,
    config: RunConfig,
    flow: FlowMode | str = FlowMode.AUTO,
    size: str = "small",
    seed: int | None = None,
    reducer: Any = None,
    data: Any = None,
) -> BenchResult:
    """Warm up, then time ``config.measure_iters`` runs, checking each against the oracle."""
    seed = config.seed if seed is None else seed
    data, want = load(spec, size, seed, data)
    result: BenchResult | None = None
    for i in range(config.warmup_iters + config.measure_iters):
        got, metrics = execute_once(spec, data, config, flow, reducer)
        check(spec, got, want)
        if result is None:
            result = BenchResult(spec.id, size, seed, config.workers, metrics.flow, got)
        if i >= config.warmup_iters:
            result.iterations.append(metrics)
    assert result is not None
    return result


def sequential_time_ns(spec: BenchmarkSpec, size: str, seed: int, config: RunConfig, data: Any = None) -> int:
    """Mean wall time of the single-threaded baseline with the compiled reducer."""
    data, want = load(spec, size, seed, data)

    def runner(mapper, red, items):
        return run_baseline_sequential(Job(mapper, red, FlowMode.FORCE_REDUCE), items, config.chunk_bytes, compiled=True)

    times: list[int] = []
    for i in range(config.warmup_iters + config.measure_iters):
        t0 = time.perf_counter_ns()
        got = canonical(spec.execute(data, runner, spec.kernel))
        elapsed = time.perf_counter_ns() - t0
        check(spec, got, want)
        if i >= config.warmup_iters:
            times.append(elapsed)
    return round(statistics.fmean(times))


def reference_results(spec: BenchmarkSpec, data: Any) -> list:
    """The benchmark driven by the interpreter-backed sequential runtime."""

    def runner(mapper, red, items):
        return run_baseline_sequential(Job(mapper, red, FlowMode.FORCE_REDUCE), items)

    return canonical(spec.execute(data, runner, spec.kernel))
