"""Derive a combiner from a reducer kernel.

The analysis runs six steps over the kernel's dependency graph:

1. build the def-use graph;
2. confirm the value loop is the only consumer of the value list;
3. check the init block is closed (constants only) and fold it;
4. check each loop statement depends only on accumulators, the current value
   and constants;
5. take the emit expression as the finalizer;
6. mark the reducer combinable.

Associativity of the loop update is assumed, not checked. Whether combining
may happen in arrival order is a separate, structural question answered by
:func:`order_insensitive`.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Any, Callable, Union

from .errors import MapfoldError
from .kernel.codegen import LOCAL_ALIASES, build, local, py_expr
from .kernel.depgraph import Region, build_dep_graph
from .kernel.interp import eval_expr
from .kernel.ir import (
    Assign,
    Call,
    Const,
    Expr,
    ReducerKernel,
    Var,
    reads,
    substitute,
    uses_key,
    uses_values,
)
from .kernel.syntax import format_expr
from .values import Tag, tag_of


class Reason(enum.Enum):
    NO_FULL_ITERATION = "NoFullIteration"
    CROSS_ITERATION_DEPENDENCE = "CrossIterationDependence"
    EXTERNAL_INIT_DEPENDENCE = "ExternalInitDependence"
    EMIT_INSIDE_LOOP = "EmitInsideLoop"  # unreachable for parsed kernels; kept for completeness
    OPAQUE_REDUCER = "OpaqueReducer"

    def __str__(self) -> str:
        return self.value


class Idiom(enum.Enum):
    COUNT = "Count"
    FIRST = "First"

    def __str__(self) -> str:
        return self.value


#: Binary ops that, used as ``acc = op(acc, f(v))``, commute across values.
COMMUTATIVE_OPS = frozenset({"add", "mul", "min", "max", "vec_add"})

STEP_TITLES = {
    1: "parse reducer into a dependency graph",
    2: "loop iterates over all values",
    3: "init block has no external dependencies",
    4: "loop body depends only on accumulators and the current value",
    5: "extract finalization from the emit expression",
    6: "enable the combining flow",
}


@dataclass(frozen=True)
class CombinerTriple:
    """``initialize``/``combine``/``finalize`` programs over a flat holder.

    The holder is a ``dict`` from accumulator name to value, one per key.
    """

    name: str
    holder_layout: tuple[tuple[str, Tag | None], ...]
    init_program: tuple[Assign, ...]
    combine_program: tuple[Assign, ...]
    loop_var: str
    finalize: Expr
    idiom: Idiom | None = None

    @property
    def holder_vars(self) -> tuple[str, ...]:
        return tuple(var for var, _ in self.holder_layout)


@dataclass(frozen=True)
class Combinable:
    triple: CombinerTriple
    trace: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class Idiomatic:
    kind: Idiom
    triple: CombinerTriple
    trace: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class NotCombinable:
    reason: Reason
    step: int
    detail: str = ""
    trace: tuple[str, ...] = field(default=(), compare=False)


AnalysisResult = Union[Combinable, Idiomatic, NotCombinable]


def detect_idiomatic(k: ReducerKernel) -> Idiom | None:
    """Recognise ``emit len(values)`` and ``emit first(values)`` with no other code."""
    if not isinstance(k, ReducerKernel) or k.init or k.loop is not None:
        return None
    if k.emit == Call("len"):
        return Idiom.COUNT
    if k.emit == Call("first"):
        return Idiom.FIRST
    return None


def idiom_triple(kind: Idiom) -> CombinerTriple:
    if kind is Idiom.COUNT:
        return CombinerTriple(
            name="count",
            holder_layout=(("count", Tag.INT),),
            init_program=(Assign("count", Const(0)),),
            combine_program=(Assign("count", Call("add", (Var("count"), Const(1)))),),
            loop_var="v",
            finalize=Var("count"),
            idiom=Idiom.COUNT,
        )
    # Keeping the first value needs a conditional the IR lacks, so combine is special-cased.
    return CombinerTriple(
        name="first",
        holder_layout=(("first", None),),
        init_program=(),
        combine_program=(),
        loop_var="v",
        finalize=Var("first"),
        idiom=Idiom.FIRST,
    )


def _fresh(name: str, taken: set[str]) -> str:
    candidate, n = name, 0
    while candidate in taken:
        n += 1
        candidate = f"{name}{n}"
    return candidate


def analyze(k: Any) -> AnalysisResult:
    """Classify a reducer and, when possible, derive its combiner. Never raises."""
    trace: list[str] = []

    def ok(step: int, note: str = "") -> None:
        trace.append(f"step {step}: {STEP_TITLES[step]}: ok" + (f" ({note})" if note else ""))

    def fail(reason: Reason, step: int, detail: str) -> NotCombinable:
        trace.append(f"step {step}: {STEP_TITLES[step]}: FAILED ({detail})")
        return NotCombinable(reason, step, detail, tuple(trace))

    if not isinstance(k, ReducerKernel):
        return fail(Reason.OPAQUE_REDUCER, 1, "reducer is a host function, not a kernel")

    idiom = detect_idiomatic(k)
    if idiom is not None:
        trace.append(f"idiom: {idiom} reducer handled directly")
        return Idiomatic(idiom, idiom_triple(idiom), tuple(trace))

    # 1
    graph = build_dep_graph(k)
    ok(1, f"{len(graph.nodes)} nodes, {len(graph.edges)} def-use edges")

    # 2
    for a in (*k.init, *k.body):
        if uses_values(a.expr, "first"):
            return fail(Reason.NO_FULL_ITERATION, 2, f"{a.var!r} reads first(values)")
    if uses_values(k.emit, "first"):
        return fail(Reason.NO_FULL_ITERATION, 2, "emit reads first(values)")
    ok(2, "single loop over the full value list" if k.loop else "no loop")

    # 3
    holder_order: list[str] = []
    for node in graph.region(Region.INIT):
        if uses_key(node.expr):
            return fail(Reason.EXTERNAL_INIT_DEPENDENCE, 3, f"{node.var!r} depends on the key")
        if uses_values(node.expr):
            return fail(Reason.EXTERNAL_INIT_DEPENDENCE, 3, f"{node.var!r} depends on the value list")
        if node.var not in holder_order:
            holder_order.append(node.var)
    try:
        env: dict[str, Any] = {}
        for a in k.init:
            env[a.var] = eval_expr(a.expr, env)
        init_program = tuple(Assign(var, Const(env[var])) for var in holder_order)
        layout = [(var, tag_of(env[var])) for var in holder_order]
    except MapfoldError:
        # The init block always raises; keep it verbatim so initialize() raises identically.
        init_program = k.init
        layout = [(var, None) for var in holder_order]
    ok(3, "holder " + (", ".join(f"{v}: {t}" for v, t in layout) or "empty"))

    # 4
    holders = set(holder_order)
    for node in graph.region(Region.LOOP):
        if uses_key(node.expr):
            return fail(Reason.CROSS_ITERATION_DEPENDENCE, 4, f"{node.var!r} depends on the key")
        if uses_values(node.expr):
            return fail(Reason.CROSS_ITERATION_DEPENDENCE, 4, f"{node.var!r} depends on the value list")
    for e in graph.incoming(graph.emit_node.id):
        if graph.node(e.src).region is Region.LOOP and e.var not in holders:
            return fail(
                Reason.CROSS_ITERATION_DEPENDENCE,
                4,
                f"loop-local {e.var!r} escapes the loop into the emit",
            )
    combine_program = k.body
    ok(4, f"{len(combine_program)} statement(s) copied to combine")

    # 5
    finalize = k.emit
    if uses_values(finalize, "len"):
        counter = _fresh("n", holders | {a.var for a in k.body} | {k.loop_var or ""})
        finalize = substitute(finalize, {Call("len"): Var(counter)})
        layout.append((counter, Tag.INT))
        init_program = (*init_program, Assign(counter, Const(0)))
        combine_program = (*combine_program, Assign(counter, Call("add", (Var(counter), Const(1)))))
        ok(5, f"len(values) replaced by counter {counter!r}")
    else:
        ok(5, f"finalize = {format_expr(finalize)}")

    triple = CombinerTriple(
        name=k.name,
        holder_layout=tuple(layout),
        init_program=tuple(init_program),
        combine_program=tuple(combine_program),
        loop_var=k.loop_var or "v",
        finalize=finalize,
    )
    # 6
    ok(6)
    return Combinable(triple, tuple(trace))


def triple_of(result: AnalysisResult) -> CombinerTriple | None:
    if isinstance(result, (Combinable, Idiomatic)):
        return result.triple
    return None


# -- reference semantics of the triple ---------------------------------------------


def triple_initialize(t: CombinerTriple) -> dict[str, Any]:
    """A fresh holder for one key."""
    env: dict[str, Any] = {}
    for a in t.init_program:
        env[a.var] = eval_expr(a.expr, env)
    return {var: env[var] for var in t.holder_vars if var in env}


def triple_combine(t: CombinerTriple, h: dict[str, Any], v: Any) -> dict[str, Any]:
    """Fold one emitted value into holder ``h`` (in place) and return it."""
    if t.idiom is Idiom.FIRST:
        if "first" not in h:
            h["first"] = v
        return h
    env = dict(h)
    for a in t.combine_program:
        env[a.var] = eval_expr(a.expr, env, loop_value=v)
    for var in t.holder_vars:
        h[var] = env[var]
    return h


def triple_finalize(t: CombinerTriple, key: Any, h: dict[str, Any]) -> tuple[Any, Any]:
    return key, eval_expr(t.finalize, h, key)


def fold_values(t: CombinerTriple, key: Any, values: Any) -> tuple[Any, Any]:
    """initialize, combine every value in order, finalize."""
    h = triple_initialize(t)
    for v in values:
        triple_combine(t, h, v)
    return triple_finalize(t, key, h)


# -- flow safety ------------------------------------------------------------------


def order_insensitive(t: CombinerTriple) -> bool:
    """True if folding values in any order gives the same holder.

    Sufficient condition: every accumulator is updated at most once per value
    as ``acc = op(acc, e)`` (either operand order) with ``op`` in
    :data:`COMMUTATIVE_OPS` and ``e`` built only from the current value,
    constants and loop-locals that are themselves such expressions.
    """
    if t.idiom is Idiom.COUNT:
        return True
    if t.idiom is Idiom.FIRST:
        return False
    holders = set(t.holder_vars)
    pure: set[str] = set()
    updated: set[str] = set()
    for a in t.combine_program:
        r = reads(a.expr)
        if a.var not in holders:
            if not r <= pure:
                return False
            pure.add(a.var)
            continue
        if a.var in updated:
            return False
        updated.add(a.var)
        e = a.expr
        if not (isinstance(e, Call) and e.op in COMMUTATIVE_OPS):
            return False
        x, y = e.args
        acc = Var(a.var)
        if x == acc and reads(y) <= pure:
            continue
        if y == acc and reads(x) <= pure:
            continue
        return False
    return True


#: Ops whose result does not change when an operand is repeated.
IDEMPOTENT_OPS = frozenset({"min", "max"})


def _is_identity(op: str, value: Any) -> bool:
    if op == "add":
        return type(value) in (int, float) and value == 0
    if op == "mul":
        return type(value) in (int, float) and value == 1
    if op == "vec_add":
        return type(value) is tuple and all(type(x) in (int, float) and x == 0 for x in value)
    return False


def merge_ops(t: CombinerTriple) -> dict[str, str] | None:
    """How to merge two holders built from disjoint parts of a key's values.

    Returns ``{holder var: op}`` for the updated accumulators, or ``None``
    when partial holders cannot be merged. Merging ``op(a, b)`` is exact when
    the combine step is order-insensitive and every accumulator starts at the
    identity of its op (or the op is idempotent, so a repeated initial value
    is harmless).
    """
    if t.idiom is Idiom.FIRST or not order_insensitive(t):
        return None
    try:
        start = triple_initialize(t)
    except MapfoldError:
        # Every initialize() raises, so there is never a holder to merge.
        return None
    holders = set(t.holder_vars)
    ops: dict[str, str] = {}
    for a in t.combine_program:
        if a.var not in holders:
            continue
        assert isinstance(a.expr, Call)
        op = a.expr.op
        if op not in IDEMPOTENT_OPS and not _is_identity(op, start.get(a.var)):
            return None
        ops[a.var] = op
    return ops


# -- compilation -------------------------------------------------------------------


@dataclass(frozen=True)
class CompiledCombiner:
    """Generated Python for a triple.

    Compiled holders are the table slots themselves: the bare accumulator when
    the triple has one holder variable, a list in ``holder_vars`` order when
    it has several, ``None`` when it has none. ``combine`` returns the updated
    holder. ``fold(table, pairs)`` applies a batch of (key, value) pairs to a
    key->holder dict, creating holders on first sight, and returns how many
    holders it created.
    """

    triple: CombinerTriple
    initialize: Callable[[], Any]
    combine: Callable[[Any, Any], Any]
    finalize: Callable[[Any, Any], Any]
    fold: Callable[[dict, Any], int]
    source: str
    #: ``merge_into(table, items)`` folds (key, holder) items into ``table``
    #: and returns how many keys were new; ``None`` if holders cannot merge.
    merge_into: Callable[[dict, Any], int] | None = None
    #: ``make_emit(table)`` returns ``(emit, emitted)``: an ``emit(key, value)``
    #: folding into a private table, and a function counting its calls.
    make_emit: Callable[[dict], tuple[Callable[[Any, Any], None], Callable[[], int]]] | None = None

    def unpack(self, h: Any) -> dict[str, Any]:
        """A compiled holder as the reference ``{var: value}`` dict."""
        names = self.triple.holder_vars
        if self.triple.idiom is Idiom.FIRST:
            return {} if h is _EMPTY else {"first": h}
        if len(names) == 1:
            return {names[0]: h}
        return dict(zip(names, h or ()))


class _Empty:
    __slots__ = ()

    def __repr__(self) -> str:
        return "<empty holder>"


#: Holder of the First idiom before any value arrives.
_EMPTY = _Empty()


def _slot_reads(t: CombinerTriple, names: list[str], indent: str) -> list[str]:
    if len(t.holder_vars) == 1:
        return [f"{indent}{local(names[0])} = h"] if names else []
    index = {v: i for i, v in enumerate(t.holder_vars)}
    return [f"{indent}{local(v)} = h[{index[v]}]" for v in names]


def _holder_value(t: CombinerTriple) -> str:
    names = t.holder_vars
    if not names:
        return "None"
    if len(names) == 1:
        return local(names[0])
    return "[" + ", ".join(local(v) for v in names) + "]"


def _combine_lines(t: CombinerTriple, indent: str, store: str) -> list[str]:
    """Statements folding ``lv`` into holder ``h``; the new holder is written to ``store``."""
    holders = t.holder_vars
    read_vars: list[str] = []
    written: list[str] = []
    defined: set[str] = set()
    for a in t.combine_program:
        for var in sorted(reads(a.expr)):
            if var in holders and var not in defined and var not in read_vars:
                read_vars.append(var)
        defined.add(a.var)
        if a.var in holders and a.var not in written:
            written.append(a.var)
    lines = _slot_reads(t, read_vars, indent)
    lines += [f"{indent}{local(a.var)} = {py_expr(a.expr)}" for a in t.combine_program]
    if len(holders) == 1:
        if written:
            lines.append(f"{indent}{store} = {local(holders[0])}")
    else:
        index = {v: i for i, v in enumerate(holders)}
        lines += [f"{indent}h[{index[v]}] = {local(v)}" for v in written]
    return lines


def _constant_scalar(t: CombinerTriple) -> Const | None:
    """The initial value when the holder is one variable initialised to a constant."""
    if len(t.holder_vars) == 1 and len(t.init_program) == 1:
        a = t.init_program[0]
        if a.var == t.holder_vars[0] and isinstance(a.expr, Const):
            return a.expr
    return None


def _upsert_lines(t: CombinerTriple, indent: str) -> list[str]:
    """Statements folding ``lv`` into ``table[key]``, creating the holder if absent."""
    start = _constant_scalar(t)
    if start is not None:
        # Values are immutable, so the constant can seed a missing slot directly.
        var = local(t.holder_vars[0])
        return [
            f"{indent}{var} = get(key, {py_expr(start)})",
            *(f"{indent}{local(a.var)} = {py_expr(a.expr)}" for a in t.combine_program),
            f"{indent}table[key] = {var}",
        ]
    scalar = len(t.holder_vars) == 1
    inner = indent + "    "
    return [
        f"{indent}h = get(key, _MISSING)",
        f"{indent}if h is _MISSING:",
        *[f"{inner}{local(a.var)} = {py_expr(a.expr)}" for a in t.init_program],
        f"{inner}h = {_holder_value(t)}",
        *([] if scalar else [f"{inner}table[key] = h"]),
        *_combine_lines(t, indent, "h"),
        *([f"{indent}table[key] = h"] if scalar else []),
    ]


def combiner_source(t: CombinerTriple) -> str:
    init = [f"    {local(a.var)} = {py_expr(a.expr)}" for a in t.init_program]
    src = ["def initialize():", *init, f"    return {_holder_value(t)}", ""]
    src += ["def combine(h, lv):", *_combine_lines(t, "    ", "h"), "    return h", ""]
    fin_reads = [v for v in t.holder_vars if v in reads(t.finalize)]
    src += ["def finalize(key, h):", *_slot_reads(t, fin_reads, "    "), f"    return {py_expr(t.finalize)}", ""]
    fold = [
        "def fold(table, pairs):",
        f"    {LOCAL_ALIASES}",
        "    before = len(table)",
        "    get = table.get",
        "    for key, lv in pairs:",
        *_upsert_lines(t, "        "),
        "    return len(table) - before",
        "",
    ]
    return "\n".join(src + fold)


def merge_source(t: CombinerTriple, ops: dict[str, str]) -> str:
    """``merge_into`` and ``make_emit`` for a mergeable triple."""
    scalar = len(t.holder_vars) == 1
    src = [
        "def merge_into(table, items):",
        "    new = 0",
        "    get = table.get",
        "    for key, h in items:",
        "        cur = get(key, _MISSING)",
        "        if cur is _MISSING:",
        "            table[key] = h",
        "            new += 1",
    ]
    if scalar:
        var = t.holder_vars[0]
        if var in ops:
            src += ["        else:", f"            table[key] = _{ops[var]}(cur, h)"]
    else:
        index = {v: i for i, v in enumerate(t.holder_vars)}
        merged = [f"            cur[{index[v]}] = _{op}(cur[{index[v]}], h[{index[v]}])" for v, op in ops.items()]
        if merged:
            src += ["        else:", *merged]
    src += ["    return new", ""]
    src += [
        "def make_emit(table):",
        f"    {LOCAL_ALIASES}",
        "    get = table.get",
        "    n = 0",
        "",
        "    def emit(key, lv):",
        "        nonlocal n",
        "        n += 1",
        *_upsert_lines(t, "        "),
        "",
        "    def emitted():",
        "        return n",
        "",
        "    return emit, emitted",
        "",
    ]
    return "\n".join(src)


_FIRST_SOURCE = '''\
def initialize():
    return _EMPTY

def combine(h, lv):
    return lv if h is _EMPTY else h

def finalize(key, h):
    return h

def fold(table, pairs):
    new = 0
    for key, lv in pairs:
        if key not in table:
            table[key] = lv
            new += 1
    return new
'''


@functools.lru_cache(maxsize=256)
def compile_combiner(t: CombinerTriple) -> CompiledCombiner:
    src = _FIRST_SOURCE if t.idiom is Idiom.FIRST else combiner_source(t)
    names = ["initialize", "combine", "finalize", "fold"]
    ops = merge_ops(t)
    if ops is not None:
        src += "\n" + merge_source(t, ops)
        names += ["merge_into", "make_emit"]
    extra = {"_EMPTY": _EMPTY, "_MISSING": _EMPTY}
    fns = {name: build(src, name, f"<combiner {t.name}>", extra) for name in names}
    return CompiledCombiner(
        t,
        fns["initialize"],
        fns["combine"],
        fns["finalize"],
        fns["fold"],
        src,
        fns.get("merge_into"),
        fns.get("make_emit"),
    )


def render_triple(t: CombinerTriple) -> str:
    """The triple written in kernel syntax, one section per generated method."""
    layout = ", ".join(f"{v}: {tag or 'any'}" for v, tag in t.holder_layout) or "empty holder"
    out = [f"# initialize ({layout})"]
    out += [f"let {a.var} = {format_expr(a.expr)}" for a in t.init_program]
    out.append("# combine")
    if t.idiom is Idiom.FIRST:
        out.append("#   keep the first value seen: first = v")
    else:
        out.append(f"for {t.loop_var} in values:")
        out += [f"  {a.var} = {format_expr(a.expr, t.loop_var)}" for a in t.combine_program]
    out.append("# finalize")
    out.append(f"emit {format_expr(t.finalize)}")
    return "\n".join(out) + "\n"


def describe(result: AnalysisResult) -> str:
    if isinstance(result, Combinable):
        return "Combinable"
    if isinstance(result, Idiomatic):
        return f"Idiomatic({result.kind})"
    return f"NotCombinable({result.reason}) step {result.step}"
