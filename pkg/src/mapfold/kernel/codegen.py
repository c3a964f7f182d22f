"""Compile kernel IR to Python functions.

The runtime executes generated code rather than walking the IR per value;
:func:`mapfold.kernel.interp.interpret_reduce` stays the reference the
generated code is tested against.
"""
from __future__ import annotations

import functools
from typing import Any, Callable

from ..values import INT_MAX, INT_MIN
from .ir import Call, Const, Expr, KeyRef, LoopVarRef, ReducerKernel, Var
from .ops import BINARY

#: Names visible to generated code.
NAMESPACE: dict[str, Any] = {f"_{op}": fn for op, fn in BINARY.items()}
NAMESPACE.update(_type=type, _int=int)

#: First statement of generated loops: builtins used per value as fast locals.
LOCAL_ALIASES = "_type, _int = type, int"


def local(var: str) -> str:
    return f"v_{var}"


def py_expr(expr: Expr, loop_local: str = "lv") -> str:
    """Python source for ``expr``; variables become ``v_<name>`` locals."""
    if isinstance(expr, Const):
        return repr(expr.value)
    if isinstance(expr, Var):
        return local(expr.name)
    if isinstance(expr, KeyRef):
        return "key"
    if isinstance(expr, LoopVarRef):
        return loop_local
    if isinstance(expr, Call):
        if expr.op == "len":
            return "len(values)"
        if expr.op == "first":
            return "values[0]"
        a, b = (py_expr(x, loop_local) for x in expr.args)
        if expr.op in _INLINE_INT and all(_inlinable(x) for x in expr.args):
            return _int_fast_path(expr, a, b)
        return f"_{expr.op}({a}, {b})"
    raise TypeError(f"not an expression: {expr!r}")


_INLINE_INT = {"add": "+", "sub": "-"}


def _inlinable(expr: Expr) -> bool:
    if isinstance(expr, Const):
        return type(expr.value) is int
    return isinstance(expr, (Var, KeyRef, LoopVarRef))


def _int_fast_path(expr: Call, a: str, b: str) -> str:
    # Int op Int that stays in range is computed inline; everything else
    # (Float, wrap-around, type errors) goes through the library function.
    checks = [f"_type({src}) is _int" for src, x in zip((a, b), expr.args) if not isinstance(x, Const)]
    sym = _INLINE_INT[expr.op]
    guard = " and ".join([*checks, f"{INT_MIN} <= (_t := {a} {sym} {b}) <= {INT_MAX}"])
    return f"(_t if {guard} else _{expr.op}({a}, {b}))"


def build(src: str, name: str, filename: str, extra: dict[str, Any] | None = None) -> Callable[..., Any]:
    ns = dict(NAMESPACE)
    ns.update(extra or {})
    exec(compile(src, filename, "exec"), ns)
    fn = ns[name]
    fn.__mapfold_source__ = src
    return fn


def reducer_source(k: ReducerKernel) -> str:
    lines = ["def reduce(key, values):", f"    {LOCAL_ALIASES}"]
    lines += [f"    {local(a.var)} = {py_expr(a.expr)}" for a in k.init]
    if k.loop is not None:
        lines.append("    for lv in values:")
        lines += [f"        {local(a.var)} = {py_expr(a.expr)}" for a in k.loop.body]
    lines.append(f"    return {py_expr(k.emit)}")
    return "\n".join(lines) + "\n"


@functools.lru_cache(maxsize=256)
def compile_reducer(k: ReducerKernel) -> Callable[[Any, Any], Any]:
    """Return ``reduce(key, values) -> value`` equivalent to ``interpret_reduce``."""
    return build(reducer_source(k), "reduce", f"<reducer {k.name}>")
