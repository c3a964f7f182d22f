"""Reference interpreter: the ground-truth semantics of a reducer kernel."""
from __future__ import annotations

from typing import Any, Mapping, Sequence

from ..errors import KernelTypeError
from .ir import Call, Const, Expr, KeyRef, LoopVarRef, ReducerKernel, Var
from .ops import BINARY

_UNSET = object()


def eval_expr(
    expr: Expr,
    env: Mapping[str, Any],
    key: Any = _UNSET,
    loop_value: Any = _UNSET,
    values: Sequence[Any] | None = None,
) -> Any:
    """Evaluate one expression.

    ``key``, ``loop_value`` and ``values`` are only required when the
    expression actually references them.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, KeyRef):
        if key is _UNSET:
            raise KernelTypeError("key is not available here")
        return key
    if isinstance(expr, LoopVarRef):
        if loop_value is _UNSET:
            raise KernelTypeError("loop variable is not available here")
        return loop_value
    if isinstance(expr, Call):
        if expr.op == "len":
            if values is None:
                raise KernelTypeError("len(values) is not available here")
            return len(values)
        if expr.op == "first":
            if values is None:
                raise KernelTypeError("first(values) is not available here")
            return values[0]
        a = eval_expr(expr.args[0], env, key, loop_value, values)
        b = eval_expr(expr.args[1], env, key, loop_value, values)
        return BINARY[expr.op](a, b)
    raise TypeError(f"not an expression: {expr!r}")


def interpret_reduce(k: ReducerKernel, key: Any, values: Sequence[Any]) -> tuple[Any, Any]:
    """Run ``k`` over one key's value list and return the emitted pair."""
    if not values:
        raise ValueError("reducers are never invoked with an empty value list")
    env: dict[str, Any] = {}
    for a in k.init:
        env[a.var] = eval_expr(a.expr, env, key, values=values)
    if k.loop is not None:
        body = k.loop.body
        for v in values:
            for a in body:
                env[a.var] = eval_expr(a.expr, env, key, v, values)
    return key, eval_expr(k.emit, env, key, values=values)
