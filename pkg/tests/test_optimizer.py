from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kernelgen import fold_routes, outcome, random_any_kernel, random_combinable_shape, random_values, same_outcome
from mapfold.bench import suite
from mapfold.kernel import interpret_reduce, parse_kernel
from mapfold.optimizer import (
    Combinable,
    Idiom,
    Idiomatic,
    NotCombinable,
    Reason,
    analyze,
    compile_combiner,
    describe,
    detect_idiomatic,
    fold_values,
    merge_ops,
    order_insensitive,
    render_triple,
    triple_combine,
    triple_finalize,
    triple_initialize,
)
from mapfold.values import Tag, values_close

SUM = "reducer sum\nlet sum = 0\nfor v in values:\n  sum = add(sum, v)\nemit sum\n"


def kernel(body: str, init: str = "let acc = 0", emit: str = "acc", name: str = "k"):
    lines = [f"reducer {name}", *init.splitlines(), "for v in values:", *("  " + b for b in body.splitlines())]
    return parse_kernel("\n".join(lines + [f"emit {emit}", ""]))


def routes_agree(k, key, values) -> None:
    """Every fold route equals the interpreter; reordered routes are close for floats."""
    expected = outcome(lambda: interpret_reduce(k, key, values)[1])
    result = analyze(k)
    assert isinstance(result, Combinable)
    for name, got in fold_routes(result.triple, key, values).items():
        if name == "merged" and got[0] == expected[0] == "ok":
            assert values_close(got[1], expected[1]), (name, got, expected)
        else:
            assert same_outcome(got, expected), (name, got, expected)


class TestAnalyze:
    def test_sum_kernel(self):
        r = analyze(parse_kernel(SUM))
        assert isinstance(r, Combinable)
        t = r.triple
        assert t.holder_layout == (("sum", Tag.INT),)
        assert render_triple(t) == (
            "# initialize (sum: Int)\nlet sum = 0\n# combine\nfor v in values:\n  sum = add(sum, v)\n# finalize\nemit sum\n"
        )
        assert [line.split(":")[0] for line in r.trace] == [f"step {i}" for i in range(1, 7)]

    def test_idioms(self):
        assert detect_idiomatic(parse_kernel("reducer c\nemit len(values)\n")) is Idiom.COUNT
        assert detect_idiomatic(parse_kernel("reducer f\nemit first(values)\n")) is Idiom.FIRST
        assert detect_idiomatic(parse_kernel(SUM)) is None
        r = analyze(parse_kernel("reducer c\nemit len(values)\n"))
        assert isinstance(r, Idiomatic) and describe(r) == "Idiomatic(Count)"

    def test_key_in_init(self):
        r = analyze(kernel("acc = add(acc, v)", init="let acc = key"))
        assert isinstance(r, NotCombinable)
        assert (r.reason, r.step) == (Reason.EXTERNAL_INIT_DEPENDENCE, 3)
        assert describe(r) == "NotCombinable(ExternalInitDependence) step 3"

    def test_values_in_init(self):
        r = analyze(kernel("acc = add(acc, v)", init="let acc = len(values)"))
        assert (r.reason, r.step) == (Reason.EXTERNAL_INIT_DEPENDENCE, 3)

    def test_first_outside_idiom(self):
        r = analyze(kernel("acc = add(acc, v)", emit="add(acc, first(values))"))
        assert (r.reason, r.step) == (Reason.NO_FULL_ITERATION, 2)

    def test_key_in_loop(self):
        r = analyze(kernel("acc = add(acc, key)"))
        assert (r.reason, r.step) == (Reason.CROSS_ITERATION_DEPENDENCE, 4)

    def test_escaping_loop_local(self):
        r = analyze(kernel("acc = add(acc, v)\nlast = v", emit="add(acc, last)"))
        assert (r.reason, r.step) == (Reason.CROSS_ITERATION_DEPENDENCE, 4)

    def test_opaque(self):
        r = analyze(lambda key, values: sum(values))
        assert (r.reason, r.step) == (Reason.OPAQUE_REDUCER, 1)

    def test_len_becomes_counter(self):
        r = analyze(kernel("acc = add(acc, v)", emit="div(acc, len(values))"))
        assert r.triple.holder_vars == ("acc", "n")
        assert fold_values(r.triple, "k", [2, 4, 6]) == ("k", 4)

    def test_loop_locals_stay_out_of_the_holder(self):
        r = analyze(kernel("sq = mul(v, v)\nacc = add(acc, sq)"))
        assert r.triple.holder_vars == ("acc",)
        assert fold_values(r.triple, 0, [1, 2, 3]) == (0, 14)

    def test_init_is_folded_to_constants(self):
        r = analyze(kernel("acc = max(acc, v)", init="let a = 3\nlet acc = mul(a, -10)"))
        assert triple_initialize(r.triple) == {"a": 3, "acc": -30}

    def test_error_in_init_is_kept(self):
        r = analyze(kernel("acc = add(acc, v)", init="let acc = div(1, 0)"))
        assert isinstance(r, Combinable)
        assert outcome(lambda: triple_initialize(r.triple)) == ("error", "DivisionByZero")

    @pytest.mark.parametrize("bench", sorted(suite.BENCHMARKS))
    def test_benchmark_kernels(self, bench):
        spec = suite.get(bench)
        assert describe(analyze(spec.kernel)) == spec.expected_analysis


class TestTripleExamples:
    def test_sum(self):
        t = analyze(parse_kernel(SUM)).triple
        assert triple_initialize(t) == {"sum": 0}
        assert triple_combine(t, {"sum": 3}, 1) == {"sum": 4}
        assert triple_finalize(t, "THE", {"sum": 2}) == ("THE", 2)

    def test_count(self):
        t = analyze(parse_kernel("reducer c\nemit len(values)\n")).triple
        assert triple_initialize(t) == {"count": 0}
        assert triple_combine(t, {"count": 5}, "anything") == {"count": 6}

    def test_first(self):
        t = analyze(parse_kernel("reducer f\nemit first(values)\n")).triple
        h = triple_initialize(t)
        for v in (7, 8, 9):
            triple_combine(t, h, v)
        assert triple_finalize(t, "k", h) == ("k", 7)

    def test_kmeans(self):
        t = analyze(suite.get("km").kernel).triple
        assert t.holder_vars == ("sum", "count")
        assert triple_initialize(t) == {"sum": (0.0, 0.0, 0.0), "count": 0}
        h = triple_combine(t, {"sum": (1.0, 1.0, 1.0), "count": 1}, (2.0, 0.0, 2.0))
        assert h == {"sum": (3.0, 1.0, 3.0), "count": 2}
        assert triple_finalize(t, 0, h) == (0, (1.5, 0.5, 1.5))

    def test_holders_are_independent(self):
        t = analyze(parse_kernel(SUM)).triple
        a, b = triple_initialize(t), triple_initialize(t)
        triple_combine(t, a, 5)
        assert b == {"sum": 0}

    def test_compiled_holder_slots(self):
        single = compile_combiner(analyze(parse_kernel(SUM)).triple)
        assert single.initialize() == 0 and single.unpack(7) == {"sum": 7}
        multi = compile_combiner(analyze(suite.get("km").kernel).triple)
        assert multi.initialize() == [(0.0, 0.0, 0.0), 0]
        first = compile_combiner(analyze(parse_kernel("reducer f\nemit first(values)\n")).triple)
        assert first.finalize("k", first.combine(first.combine(first.initialize(), 4), 5)) == 4


class TestFoldEquivalence:
    @given(st.integers(0, 2**32 - 1))
    def test_combinable_kernels(self, seed):
        rng = random.Random(seed)
        k = random_combinable_shape(rng)
        routes_agree(k, rng.randint(-3, 3), random_values(rng, k))

    @given(st.integers(0, 2**32 - 1))
    def test_analyze_never_misclassifies(self, seed):
        rng = random.Random(seed)
        k = random_any_kernel(rng)
        if isinstance(analyze(k), Combinable):
            routes_agree(k, rng.randint(-3, 3), random_values(rng, k))

    @given(st.lists(st.integers(-100, 100), min_size=1, max_size=50))
    def test_idioms(self, vs):
        count = analyze(parse_kernel("reducer c\nemit len(values)\n")).triple
        first = analyze(parse_kernel("reducer f\nemit first(values)\n")).triple
        assert fold_values(count, 0, vs) == (0, len(vs))
        assert fold_values(first, 0, vs) == (0, vs[0])


class TestOrder:
    @given(st.integers(0, 2**32 - 1))
    def test_order_insensitive_kernels_commute(self, seed):
        rng = random.Random(seed)
        k = random_combinable_shape(rng)
        t = analyze(k).triple
        if not order_insensitive(t):
            return
        vs = random_values(rng, k)
        shuffled = vs[:]
        rng.shuffle(shuffled)
        a, b = outcome(lambda: fold_values(t, 0, vs)), outcome(lambda: fold_values(t, 0, shuffled))
        if a[0] == "ok" and b[0] == "ok":
            assert values_close(a[1], b[1])
        else:
            assert a == b

    def test_horner_is_not_permutation_invariant(self):
        # Only add and mul on Int, yet the result depends on value order.
        k = kernel("acc = add(mul(acc, 2), v)")
        assert interpret_reduce(k, 0, [1, 0])[1] == 2
        assert interpret_reduce(k, 0, [0, 1])[1] == 1
        assert not order_insensitive(analyze(k).triple)

    def test_sub_is_order_sensitive(self):
        assert not order_insensitive(analyze(kernel("acc = sub(v, acc)")).triple)

    def test_classification(self):
        assert order_insensitive(analyze(suite.get("km").kernel).triple)
        assert order_insensitive(analyze(kernel("sq = mul(v, v)\nacc = max(sq, acc)")).triple)
        assert not order_insensitive(analyze(kernel("acc = add(acc, v)\nacc = mul(acc, 2)")).triple)
        assert not order_insensitive(analyze(parse_kernel("reducer f\nemit first(values)\n")).triple)
        assert order_insensitive(analyze(parse_kernel("reducer c\nemit len(values)\n")).triple)


class TestMergeOps:
    def test_identity_start(self):
        assert merge_ops(analyze(parse_kernel(SUM)).triple) == {"sum": "add"}
        assert merge_ops(analyze(suite.get("km").kernel).triple) == {"sum": "vec_add", "count": "add"}

    def test_non_identity_start(self):
        assert merge_ops(analyze(kernel("acc = add(acc, v)", init="let acc = 5")).triple) is None
        assert merge_ops(analyze(kernel("acc = mul(acc, v)", init="let acc = 1")).triple) == {"acc": "mul"}
        assert merge_ops(analyze(kernel("acc = mul(acc, v)", init="let acc = 2")).triple) is None

    def test_idempotent_ops_take_any_start(self):
        assert merge_ops(analyze(kernel("acc = max(acc, v)", init="let acc = 5")).triple) == {"acc": "max"}

    def test_unsafe(self):
        assert merge_ops(analyze(kernel("acc = sub(v, acc)")).triple) is None
        assert merge_ops(analyze(parse_kernel("reducer f\nemit first(values)\n")).triple) is None

    def test_merge_equals_sequential_fold(self):
        cc = compile_combiner(analyze(suite.get("km").kernel).triple)
        shared: dict = {}
        for part in ([(1.0, 0.0, 0.0)], [(0.0, 2.0, 0.0), (0.0, 0.0, 4.0)]):
            local: dict = {}
            emit, emitted = cc.make_emit(local)
            for p in part:
                emit("c", p)
            cc.merge_into(shared, list(local.items()))
        assert cc.finalize("c", shared["c"]) == (1 / 3, 2 / 3, 4 / 3)

    def test_failing_init_is_not_merged(self):
        t = analyze(kernel("acc = add(acc, v)", init="let acc = div(5, 0)")).triple
        assert merge_ops(t) is None
        cc = compile_combiner(t)
        assert cc.merge_into is None
        assert outcome(cc.initialize) == ("error", "DivisionByZero")
