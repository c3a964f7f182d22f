"""Builtin operations over tagged values.

Int arithmetic wraps at 64 bits (see :func:`mapfold.values.wrap_int`); mixing
Int and Float promotes to Float. ``div`` on two Ints truncates toward zero,
as the C and Java benchmark sources do.
"""
from __future__ import annotations

from typing import Any, Callable

from ..errors import DivisionByZero, KernelTypeError
from ..values import INT_MAX, INT_MIN, format_value, wrap_int


def _describe(v: Any) -> str:
    return f"{type(v).__name__} {format_value(v)}" if type(v) in (int, float, str, tuple) else repr(v)


def _numeric(op: str, a: Any, b: Any) -> None:
    ta, tb = type(a), type(b)
    if (ta is not int and ta is not float) or (tb is not int and tb is not float):
        raise KernelTypeError(f"{op} expects numbers, got {_describe(a)} and {_describe(b)}")


def add(a: Any, b: Any) -> Any:
    if type(a) is int and type(b) is int:
        r = a + b
        if INT_MIN <= r <= INT_MAX:
            return r
        return wrap_int(r)
    _numeric("add", a, b)
    return float(a) + float(b)


def sub(a: Any, b: Any) -> Any:
    if type(a) is int and type(b) is int:
        r = a - b
        if INT_MIN <= r <= INT_MAX:
            return r
        return wrap_int(r)
    _numeric("sub", a, b)
    return float(a) - float(b)


def mul(a: Any, b: Any) -> Any:
    if type(a) is int and type(b) is int:
        return wrap_int(a * b)
    _numeric("mul", a, b)
    return float(a) * float(b)


def div(a: Any, b: Any) -> Any:
    _numeric("div", a, b)
    if b == 0:
        raise DivisionByZero(f"div({format_value(a)}, {format_value(b)})")
    if type(a) is int and type(b) is int:
        q = abs(a) // abs(b)
        return wrap_int(q if (a < 0) == (b < 0) else -q)
    return float(a) / float(b)


def min_(a: Any, b: Any) -> Any:
    _numeric("min", a, b)
    if type(a) is not type(b):
        a, b = float(a), float(b)
    return b if b < a else a


def max_(a: Any, b: Any) -> Any:
    _numeric("max", a, b)
    if type(a) is not type(b):
        a, b = float(a), float(b)
    return b if b > a else a


def vec_add(a: Any, b: Any) -> tuple:
    if type(a) is not tuple or type(b) is not tuple:
        raise KernelTypeError(f"vec_add expects two Vecs, got {_describe(a)} and {_describe(b)}")
    if len(a) != len(b):
        raise KernelTypeError(f"vec_add length mismatch: {len(a)} vs {len(b)}")
    return tuple([add(x, y) for x, y in zip(a, b)])


def vec_scale(v: Any, s: Any) -> tuple:
    if type(v) is not tuple or (type(s) is not int and type(s) is not float):
        raise KernelTypeError(f"vec_scale expects (Vec, number), got {_describe(v)} and {_describe(s)}")
    return tuple([mul(x, s) for x in v])


BINARY: dict[str, Callable[[Any, Any], Any]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "div": div,
    "min": min_,
    "max": max_,
    "vec_add": vec_add,
    "vec_scale": vec_scale,
}
