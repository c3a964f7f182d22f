"""Concurrent intermediate (key, value) store.

Keys are spread over a fixed power-of-two number of shards, each a plain dict
guarded by its own lock. In list mode every emitted value is appended to its
key's list (the reduce flow); in holder mode it is folded into a per-key
holder through a compiled combiner (the combine flow), so the store holds one
cell per distinct key instead of one per emission.

When the combiner's holders can be merged, each map task folds into a private
holder table and merges it into the shared one when it finishes, so the
shared table is touched once per distinct key per task rather than once per
emission.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Any, Iterable

from .errors import EmitAfterSnapshot
from .optimizer import CombinerTriple, CompiledCombiner, compile_combiner
from .values import sort_key


#: Emissions per distinct key a map task needs for private tables to be worth merging.
LOCAL_COMBINE_RATIO = 2


class StoreMode(enum.Enum):
    LIST = "list"
    HOLDER = "holder"


@dataclass(frozen=True)
class StoreStats:
    pairs_emitted: int = 0
    cells_allocated: int = 0
    peak_stored_values: int = 0
    distinct_keys: int = 0
    #: Holders created in map tasks' private tables and merged away at task end.
    task_local_holders: int = 0


def default_shard_count(workers: int) -> int:
    n = max(1, 4 * workers)
    return 1 << (n - 1).bit_length()


def _append_all(table: dict, pairs: Iterable[tuple[Any, Any]]) -> int:
    new = 0
    get = table.get
    for key, value in pairs:
        bucket = get(key)
        if bucket is None:
            table[key] = [value]
            new += 1
        else:
            bucket.append(value)
    return new


class IntermediateStore:
    """Sharded key -> accumulator map shared by all map tasks of one run.

    Per-key mutual exclusion is provided at shard granularity. ``emit`` and
    :class:`Emitter` flushes are safe from any thread; ``snapshot`` closes the
    store and must only be called once the map phase has finished.
    """

    def __init__(
        self,
        combiner: CombinerTriple | CompiledCombiner | None = None,
        *,
        shards: int | None = None,
        workers: int = 1,
    ) -> None:
        n = shards if shards is not None else default_shard_count(workers)
        if n < 1 or n & (n - 1):
            raise ValueError(f"shard count must be a positive power of two, got {n}")
        if isinstance(combiner, CombinerTriple):
            combiner = compile_combiner(combiner)
        self.combiner: CompiledCombiner | None = combiner
        self.mode = StoreMode.LIST if combiner is None else StoreMode.HOLDER
        self._apply = _append_all if combiner is None else combiner.fold
        self._mask = n - 1
        self._tables: list[dict] = [{} for _ in range(n)]
        self._locks = [threading.Lock() for _ in range(n)]
        self._pairs = [0] * n
        self._cells = [0] * n
        self._merged_pairs = 0
        self._merged_keys = 0
        self._tally_lock = threading.Lock()
        self._closed = False

    @property
    def shard_count(self) -> int:
        return self._mask + 1

    def shard_of(self, key: Any) -> int:
        return hash(key) & self._mask

    def emit(self, key: Any, value: Any) -> None:
        """Record one emission."""
        self.emit_to_shard(hash(key) & self._mask, [(key, value)])

    def emit_to_shard(self, shard: int, pairs: list[tuple[Any, Any]]) -> None:
        """Apply a batch of pairs that all hash to ``shard``, under one lock hold."""
        with self._locks[shard]:
            if self._closed:
                raise EmitAfterSnapshot("store is closed; the map phase has ended")
            new = self._apply(self._tables[shard], pairs)
            self._pairs[shard] += len(pairs)
            self._cells[shard] += len(pairs) if self.combiner is None else new

    def merge_to_shard(self, shard: int, items: list[tuple[Any, Any]]) -> None:
        """Merge partial holders for keys that all hash to ``shard``."""
        assert self.combiner is not None and self.combiner.merge_into is not None
        with self._locks[shard]:
            if self._closed:
                raise EmitAfterSnapshot("store is closed; the map phase has ended")
            self._cells[shard] += self.combiner.merge_into(self._tables[shard], items)

    def _tally(self, pairs: int, keys: int) -> None:
        with self._tally_lock:
            self._merged_pairs += pairs
            self._merged_keys += keys

    def _local_combining_pays(self) -> bool:
        # Keep folding into private tables while finished tasks saw each key
        # at least twice on average; otherwise the extra merge is pure cost.
        keys = self._merged_keys
        return keys == 0 or self._merged_pairs >= LOCAL_COMBINE_RATIO * keys

    def emitter(self) -> "Emitter | CombiningEmitter":
        """A buffer for one map task; use it from a single thread and flush it once."""
        if self.combiner is not None and self.combiner.make_emit is not None and self._local_combining_pays():
            return CombiningEmitter(self)
        return Emitter(self)

    def snapshot(self, ordered: bool = True, raw: bool = False) -> list[tuple[Any, Any]]:
        """Close the store and return its (key, accumulator) entries.

        List-mode accumulators are the value lists; holder-mode ones are
        holder dicts, or the compiled holder slots when ``raw`` is set.
        ``ordered`` sorts by the canonical key order, which is only there to
        make tests deterministic.
        """
        for lock in self._locks:
            lock.acquire()
        try:
            self._closed = True
        finally:
            for lock in self._locks:
                lock.release()
        entries = [item for table in self._tables for item in table.items()]
        if self.combiner is not None and not raw:
            unpack = self.combiner.unpack
            entries = [(k, unpack(h)) for k, h in entries]
        if ordered:
            entries.sort(key=lambda kv: sort_key(kv[0]))
        return entries

    @property
    def closed(self) -> bool:
        return self._closed

    def stats(self) -> StoreStats:
        pairs = sum(self._pairs) + self._merged_pairs
        cells = sum(self._cells)
        # Nothing is ever removed, so the current stored count is also the peak.
        return StoreStats(
            pairs_emitted=pairs,
            cells_allocated=cells,
            peak_stored_values=cells,
            distinct_keys=sum(len(t) for t in self._tables),
            task_local_holders=self._merged_keys,
        )


class Emitter:
    """Per-task emission buffer, bucketed by shard and flushed in batches.

    Batching amortises lock traffic; the buffer never outlives one map task,
    whose input is bounded by the split size.
    """

    __slots__ = ("_store", "_buckets", "_mask")

    def __init__(self, store: IntermediateStore) -> None:
        self._store = store
        self._mask = store._mask
        self._buckets: list[list] = [[] for _ in range(store.shard_count)]

    def emit(self, key: Any, value: Any) -> None:
        self._buckets[hash(key) & self._mask].append((key, value))

    def flush(self) -> None:
        for shard, bucket in enumerate(self._buckets):
            if bucket:
                self._store.emit_to_shard(shard, bucket)
                self._buckets[shard] = []

    def __enter__(self) -> "Emitter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.flush()


class CombiningEmitter:
    """Per-task emitter that folds into a private holder table.

    ``emit`` is generated code specialised to the combiner. ``flush`` merges
    the private holders into the store shard by shard.
    """

    __slots__ = ("_store", "_table", "emit", "_emitted")

    def __init__(self, store: IntermediateStore) -> None:
        assert store.combiner is not None and store.combiner.make_emit is not None
        self._store = store
        self._table: dict = {}
        self.emit, self._emitted = store.combiner.make_emit(self._table)

    def flush(self) -> None:
        store = self._store
        if self._closed_early():
            return
        mask = store._mask
        buckets: list[list] = [[] for _ in range(store.shard_count)]
        for item in self._table.items():
            buckets[hash(item[0]) & mask].append(item)
        for shard, bucket in enumerate(buckets):
            if bucket:
                store.merge_to_shard(shard, bucket)
        store._tally(self._emitted(), len(self._table))
        self._table.clear()
        self.emit, self._emitted = store.combiner.make_emit(self._table)

    def _closed_early(self) -> bool:
        if self._store.closed:
            raise EmitAfterSnapshot("store is closed; the map phase has ended")
        return not self._table and self._emitted() == 0

    def __enter__(self) -> "CombiningEmitter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.flush()
