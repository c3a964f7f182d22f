"""The MapReduce engine.

A run splits the input, executes one map task per split on a thread pool,
waits for all of them (the barrier), then either reduces each key's value
list (reduce flow) or finalizes each key's holder (combine flow).
"""
from __future__ import annotations

import enum
import logging
import math
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence, Union

import numpy as np

from .errors import ConfigError
from .kernel.codegen import compile_reducer
from .kernel.interp import interpret_reduce
from .kernel.ir import ReducerKernel
from .optimizer import (
    AnalysisResult,
    CombinerTriple,
    NotCombinable,
    analyze,
    compile_combiner,
    order_insensitive,
    triple_of,
)
from .store import IntermediateStore, StoreStats
from .values import canonical

log = logging.getLogger(__name__)

#: Split size in bytes; the L1 data cache size of the reference workstation.
DEFAULT_CHUNK_BYTES = 32 * 1024
#: Minimum keys per reduce task once keys are numerous.
REDUCE_BATCH = 64

OpaqueReducer = Callable[[Any, list, Callable[[Any, Any], None]], None]
Reducer = Union[ReducerKernel, OpaqueReducer]


class Flow(enum.Enum):
    REDUCE = "reduce"
    COMBINE = "combine"

    def __str__(self) -> str:
        return self.value


class FlowMode(enum.Enum):
    AUTO = "auto"
    FORCE_REDUCE = "reduce"
    FORCE_COMBINE = "combine"


@dataclass(frozen=True)
class Split:
    """A contiguous slice ``items`` of the input, starting at input position ``start``."""

    index: int
    start: int
    items: Any

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class Job:
    """A mapper plus a reducer.

    ``mapper(split, emitter)`` calls ``emitter.emit(key, value)``. The reducer
    is either a :class:`ReducerKernel` or an opaque host function
    ``reducer(key, values, emit)`` that may emit any number of pairs; opaque
    reducers always run on the reduce flow.
    """

    mapper: Callable[[Split, Any], None]
    reducer: Reducer
    flow_mode: FlowMode = FlowMode.AUTO
    item_size: Callable[[Any], int] | None = None
    _analysis: AnalysisResult | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if isinstance(self.flow_mode, str):
            self.flow_mode = FlowMode(self.flow_mode)
        if not isinstance(self.reducer, ReducerKernel) and not callable(self.reducer):
            raise ConfigError(f"reducer must be a kernel or a callable, got {self.reducer!r}")
        if not isinstance(self.reducer, ReducerKernel) and self.flow_mode is FlowMode.FORCE_COMBINE:
            raise ConfigError("an opaque reducer cannot be forced onto the combine flow")

    @property
    def analysis(self) -> AnalysisResult:
        if self._analysis is None:
            self._analysis = analyze(self.reducer)
        return self._analysis


@dataclass
class RunConfig:
    workers: int = 1
    chunk_bytes: int = DEFAULT_CHUNK_BYTES
    seed: int = 0
    warmup_iters: int = 5
    measure_iters: int = 10

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.chunk_bytes < 1:
            raise ConfigError(f"chunk_bytes must be >= 1, got {self.chunk_bytes}")
        if self.warmup_iters < 0 or self.measure_iters < 1:
            raise ConfigError("need warmup_iters >= 0 and measure_iters >= 1")


@dataclass
class RunMetrics:
    flow: Flow
    workers: int
    t_split_ns: int = 0
    t_map_ns: int = 0
    t_group_ns: int = 0
    t_reduce_ns: int = 0
    stats: StoreStats = field(default_factory=StoreStats)
    splits: int = 0
    map_tasks: int = 0
    reduce_tasks: int = 0
    reduce_batches: int = 0

    @property
    def t_total_ns(self) -> int:
        return self.t_split_ns + self.t_map_ns + self.t_group_ns + self.t_reduce_ns


# -- splitting -----------------------------------------------------------------------


def item_size(item: Any) -> int:
    """Byte size of one input item: bytes/str by encoded length, arrays by ``nbytes``."""
    if isinstance(item, (bytes, bytearray, memoryview)):
        return len(item)
    if isinstance(item, str):
        return len(item) if item.isascii() else len(item.encode("utf-8"))
    if isinstance(item, np.ndarray):
        return int(item.nbytes)
    if isinstance(item, np.generic):
        return int(item.itemsize)
    return 1


def split_input(
    items: Sequence[Any], chunk_bytes: int, size: Callable[[Any], int] | None = None
) -> list[Split]:
    """Cut ``items`` into contiguous splits of at most ``chunk_bytes`` each.

    An item larger than ``chunk_bytes`` becomes a split of its own.
    """
    if chunk_bytes < 1:
        raise ConfigError(f"chunk_bytes must be >= 1, got {chunk_bytes}")
    n = len(items)
    if n == 0:
        return []
    if isinstance(items, np.ndarray) and size is None:
        per_item = max(1, int(items[0].nbytes)) if items.ndim > 1 else items.itemsize
        step = max(1, chunk_bytes // per_item)
        return [Split(i, start, items[start:start + step]) for i, start in enumerate(range(0, n, step))]
    if size is None and isinstance(items, list) and all(type(x) is str for x in items):
        # ASCII text is the common case; its byte length is its length.
        sizes = [len(x) if x.isascii() else len(x.encode("utf-8")) for x in items]
    else:
        sizes = list(map(size or item_size, items))
    # cum[i] is the byte size of items[:i]; each split greedily takes items
    # while the running total stays within chunk_bytes, and at least one.
    cum = np.concatenate(([0], np.cumsum(sizes, dtype=np.int64)))
    splits: list[Split] = []
    start = 0
    while start < n:
        end = int(np.searchsorted(cum, cum[start] + chunk_bytes, side="right")) - 1
        end = max(end, start + 1)
        splits.append(Split(len(splits), start, items[start:end]))
        start = end
    return splits


# -- flow selection ------------------------------------------------------------------


def select_flow(job: Job) -> Flow:
    """Pick the execution flow for ``job``.

    Auto combines only when the reducer is combinable and its combine step is
    order-insensitive, since map tasks fold values in arrival order.
    """
    if job.flow_mode is FlowMode.FORCE_REDUCE:
        return Flow.REDUCE
    result = job.analysis
    triple = triple_of(result)
    if job.flow_mode is FlowMode.FORCE_COMBINE:
        if triple is None:
            assert isinstance(result, NotCombinable)
            raise ConfigError(
                f"reducer is not combinable: {result.reason} at step {result.step} ({result.detail})"
            )
        return Flow.COMBINE
    if triple is not None and order_insensitive(triple):
        return Flow.COMBINE
    return Flow.REDUCE


# -- execution -----------------------------------------------------------------------


def _batches(entries: list, workers: int) -> list[list]:
    n = len(entries)
    if n <= REDUCE_BATCH:
        size = 1
    else:
        size = max(REDUCE_BATCH, math.ceil(n / (4 * workers)))
    return [entries[i:i + size] for i in range(0, n, size)]


def _run_tasks(pool: ThreadPoolExecutor, fn: Callable, args: list) -> list:
    """Submit ``fn(arg)`` for every arg; abort on the first failure."""
    futures = [pool.submit(fn, a) for a in args]
    done, pending = wait(futures, return_when=FIRST_EXCEPTION)
    for f in futures:
        if f.done() and f.exception() is not None:
            for p in pending:
                p.cancel()
            raise f.exception()
    return [f.result() for f in futures]


def _reduce_fn(reducer: Reducer) -> Callable[[list], list]:
    if isinstance(reducer, ReducerKernel):
        reduce = compile_reducer(reducer)

        def run_batch(batch: list) -> list:
            return [(key, reduce(key, values)) for key, values in batch]
    else:

        def run_batch(batch: list) -> list:
            out: list = []
            emit = lambda k, v: out.append((k, v))  # noqa: E731
            for key, values in batch:
                reducer(key, values, emit)
            return out

    return run_batch


def run(job: Job, inputs: Sequence[Any], config: RunConfig | None = None) -> tuple[list, RunMetrics]:
    """Execute ``job`` over ``inputs``; returns canonically sorted results and metrics."""
    config = config or RunConfig()
    flow = select_flow(job)
    triple: CombinerTriple | None = triple_of(job.analysis) if flow is Flow.COMBINE else None
    metrics = RunMetrics(flow=flow, workers=config.workers)
    clock = time.perf_counter_ns

    t0 = clock()
    splits = split_input(inputs, config.chunk_bytes, job.item_size)
    metrics.splits = len(splits)
    t1 = clock()
    metrics.t_split_ns = t1 - t0

    combiner = compile_combiner(triple) if triple is not None else None
    store = IntermediateStore(combiner, workers=config.workers)
    done_maps = 0
    done_lock = threading.Lock()

    def map_task(split: Split) -> None:
        nonlocal done_maps
        emitter = store.emitter()
        job.mapper(split, emitter)
        emitter.flush()
        with done_lock:
            done_maps += 1

    with ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="mapfold") as pool:
        _run_tasks(pool, map_task, splits)
        metrics.map_tasks = done_maps
        # Barrier: every map task has flushed before anything reads the store.
        assert done_maps == len(splits), "map barrier violated"
        t2 = clock()
        metrics.t_map_ns = t2 - t1

        entries = store.snapshot(ordered=False, raw=True)
        batches = _batches(entries, config.workers)
        t3 = clock()
        metrics.t_group_ns = t3 - t2

        if combiner is not None:
            finalize = combiner.finalize

            def reduce_batch(batch: list) -> list:
                return [(key, finalize(key, h)) for key, h in batch]
        else:
            reduce_batch = _reduce_fn(job.reducer)
        parts = _run_tasks(pool, reduce_batch, batches)
        results = canonical(pair for part in parts for pair in part)
        metrics.t_reduce_ns = clock() - t3

    metrics.stats = store.stats()
    metrics.reduce_tasks = len(entries)
    metrics.reduce_batches = len(batches)
    if flow is Flow.COMBINE:
        assert metrics.stats.cells_allocated == metrics.stats.distinct_keys, "holder allocation bound violated"
    log.debug("run %s: %s", flow, metrics)
    return results, metrics


def run_baseline_sequential(
    job: Job,
    inputs: Sequence[Any],
    chunk_bytes: int = DEFAULT_CHUNK_BYTES,
    *,
    compiled: bool = False,
) -> list:
    """Single-threaded reduce flow with no store, pool or combiner.

    By default reducers run through the reference interpreter, which makes this
    the correctness oracle for :func:`run`; ``compiled=True`` swaps in the
    generated reducer so the result can serve as a timing baseline.
    """

    class _Collect:
        __slots__ = ("groups",)

        def __init__(self) -> None:
            self.groups: dict[Any, list] = {}

        def emit(self, key: Any, value: Any) -> None:
            self.groups.setdefault(key, []).append(value)

    sink = _Collect()
    for split in split_input(inputs, chunk_bytes, job.item_size):
        job.mapper(split, sink)
    out: list = []
    reducer = job.reducer
    if isinstance(reducer, ReducerKernel):
        if compiled:
            reduce = compile_reducer(reducer)
            out = [(k, reduce(k, vs)) for k, vs in sink.groups.items()]
        else:
            out = [interpret_reduce(reducer, k, vs) for k, vs in sink.groups.items()]
    else:
        for k, vs in sink.groups.items():
            reducer(k, vs, lambda kk, vv: out.append((kk, vv)))
    return canonical(out)
