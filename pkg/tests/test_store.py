from __future__ import annotations

import threading

import pytest

from mapfold.errors import EmitAfterSnapshot, KernelTypeError
from mapfold.kernel import parse_kernel
from mapfold.optimizer import analyze, compile_combiner
from mapfold.store import (
    CombiningEmitter,
    Emitter,
    IntermediateStore,
    StoreMode,
    StoreStats,
    default_shard_count,
)

SUM = analyze(parse_kernel("reducer sum\nlet sum = 0\nfor v in values:\n  sum = add(sum, v)\nemit sum\n")).triple
ALTERNATING = analyze(parse_kernel("reducer alt\nlet acc = 0\nfor v in values:\n  acc = sub(v, acc)\nemit acc\n")).triple
WC_EMITS = [("THE", 1), ("CAT", 1), ("THE", 1)]


def fill(store: IntermediateStore, pairs) -> IntermediateStore:
    for k, v in pairs:
        store.emit(k, v)
    return store


def stress(store: IntermediateStore, threads: int, per_thread: int, keys: int, batched: bool) -> None:
    barrier = threading.Barrier(threads)

    def work(t: int) -> None:
        barrier.wait()
        if batched:
            em = store.emitter()
            for i in range(per_thread):
                em.emit(i % keys, 1)
            em.flush()
        else:
            for i in range(per_thread):
                store.emit(i % keys, 1)

    workers = [threading.Thread(target=work, args=(t,)) for t in range(threads)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()


class TestModes:
    def test_list_mode(self):
        s = fill(IntermediateStore(), WC_EMITS)
        assert s.mode is StoreMode.LIST
        assert s.stats() == StoreStats(pairs_emitted=3, cells_allocated=3, peak_stored_values=3, distinct_keys=2)
        assert s.snapshot() == [("CAT", [1]), ("THE", [1, 1])]

    def test_holder_mode(self):
        s = fill(IntermediateStore(SUM), WC_EMITS)
        assert s.mode is StoreMode.HOLDER
        assert s.stats() == StoreStats(pairs_emitted=3, cells_allocated=2, peak_stored_values=2, distinct_keys=2)
        assert s.snapshot() == [("CAT", {"sum": 1}), ("THE", {"sum": 2})]

    def test_raw_snapshot(self):
        s = fill(IntermediateStore(SUM), WC_EMITS)
        assert s.snapshot(raw=True) == [("CAT", 1), ("THE", 2)]

    def test_first_emission_adds_one_cell(self):
        s = IntermediateStore(SUM)
        s.emit("a", 1)
        before = s.stats().cells_allocated
        s.emit("b", 5)
        assert s.stats().cells_allocated == before + 1
        s.emit("b", 5)
        assert s.stats().cells_allocated == before + 1

    def test_empty(self):
        s = IntermediateStore(SUM)
        assert s.stats() == StoreStats()
        assert s.snapshot() == []

    def test_accepts_compiled_combiner(self):
        s = fill(IntermediateStore(compile_combiner(SUM)), WC_EMITS)
        assert s.snapshot() == [("CAT", {"sum": 1}), ("THE", {"sum": 2})]

    def test_type_error_propagates(self):
        s = IntermediateStore(SUM)
        with pytest.raises(KernelTypeError):
            s.emit("k", "text")


class TestLifecycle:
    def test_emit_after_snapshot(self):
        s = fill(IntermediateStore(), WC_EMITS)
        s.snapshot()
        assert s.closed
        with pytest.raises(EmitAfterSnapshot):
            s.emit("X", 1)

    def test_emitter_flush_after_snapshot(self):
        for triple in (None, SUM):
            s = IntermediateStore(triple)
            em = s.emitter()
            em.emit("X", 1)
            s.snapshot()
            with pytest.raises(EmitAfterSnapshot):
                em.flush()

    def test_shards(self):
        assert default_shard_count(1) == 4
        assert default_shard_count(3) == 16
        s = IntermediateStore(shards=8)
        assert s.shard_count == 8 and 0 <= s.shard_of("k") < 8
        with pytest.raises(ValueError):
            IntermediateStore(shards=6)

    def test_counters_are_monotonic(self):
        s = IntermediateStore(SUM)
        seen = []
        for k, v in WC_EMITS * 3:
            s.emit(k, v)
            st = s.stats()
            seen.append((st.pairs_emitted, st.cells_allocated))
        assert seen == sorted(seen)


class TestEmitters:
    def test_buffered_emitter_in_list_mode(self):
        s = IntermediateStore()
        em = s.emitter()
        assert type(em) is Emitter
        with em:
            for k, v in WC_EMITS:
                em.emit(k, v)
        assert s.snapshot() == [("CAT", [1]), ("THE", [1, 1])]

    def test_combining_emitter_for_mergeable_triples(self):
        s = IntermediateStore(SUM)
        em = s.emitter()
        assert type(em) is CombiningEmitter
        for k, v in WC_EMITS:
            em.emit(k, v)
        em.flush()
        em.flush()
        assert s.stats() == StoreStats(
            pairs_emitted=3, cells_allocated=2, peak_stored_values=2, distinct_keys=2, task_local_holders=2
        )
        assert s.snapshot() == [("CAT", {"sum": 1}), ("THE", {"sum": 2})]

    def test_order_sensitive_triples_are_not_merged(self):
        assert type(IntermediateStore(ALTERNATING).emitter()) is Emitter

    def test_falls_back_when_keys_rarely_repeat(self):
        s = IntermediateStore(SUM)
        em = s.emitter()
        for k in range(100):
            em.emit(k, 1)
        em.flush()
        assert type(s.emitter()) is Emitter
        dense = IntermediateStore(SUM)
        em = dense.emitter()
        for i in range(100):
            em.emit(i % 10, 1)
        em.flush()
        assert type(dense.emitter()) is CombiningEmitter

    def test_emitters_agree(self):
        pairs = [(i % 7, i) for i in range(200)]
        merged = IntermediateStore(SUM)
        em = merged.emitter()
        for k, v in pairs:
            em.emit(k, v)
        em.flush()
        assert merged.snapshot() == fill(IntermediateStore(SUM), pairs).snapshot()


class TestConcurrency:
    @pytest.mark.parametrize("keys", [1, 1000])
    @pytest.mark.parametrize("batched", [False, True])
    def test_no_lost_updates(self, keys, batched):
        threads, per_thread = 8, 20_000
        holder = IntermediateStore(SUM, workers=8)
        lists = IntermediateStore(workers=8)
        stress(holder, threads, per_thread, keys, batched)
        stress(lists, threads, per_thread, keys, batched)
        total = threads * per_thread
        assert sum(h["sum"] for _, h in holder.snapshot()) == total
        assert sum(len(vs) for _, vs in lists.snapshot()) == total
        assert holder.stats().cells_allocated == holder.stats().distinct_keys == keys
        assert lists.stats().pairs_emitted == total == holder.stats().pairs_emitted
