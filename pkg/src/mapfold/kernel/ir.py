"""Reducer kernel IR.

A kernel is an init block, at most one loop over the value list, and a
single emit expression. The emitted key is always the input key.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator, Union

from ..values import Tag, tag_of

#: Binary builtins and their arity. ``len`` and ``first`` take the value list
#: implicitly and are written ``len(values)`` / ``first(values)``.
BINARY_OPS = ("add", "sub", "mul", "div", "min", "max", "vec_add", "vec_scale")
VALUES_OPS = ("len", "first")
ARITY = {**{op: 2 for op in BINARY_OPS}, **{op: 0 for op in VALUES_OPS}}


@dataclass(frozen=True, eq=False)
class Const:
    value: Any

    @property
    def tag(self) -> Tag:
        return tag_of(self.value)

    def __eq__(self, other: object) -> bool:
        # 1 == 1.0 in Python, but Int and Float constants are distinct here.
        return isinstance(other, Const) and _same_value(self.value, other.value)

    def __hash__(self) -> int:
        return hash((Const, _typed(self.value)))


def _typed(v: Any) -> Any:
    if type(v) is tuple:
        return tuple(_typed(x) for x in v)
    return (type(v).__name__, v)


def _same_value(a: Any, b: Any) -> bool:
    if type(a) is not type(b):
        return False
    if type(a) is tuple:
        return len(a) == len(b) and all(_same_value(x, y) for x, y in zip(a, b))
    return a == b


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class KeyRef:
    pass


@dataclass(frozen=True)
class LoopVarRef:
    pass


@dataclass(frozen=True)
class Call:
    op: str
    args: tuple["Expr", ...] = ()

    def __post_init__(self) -> None:
        if self.op not in ARITY:
            raise ValueError(f"unknown builtin {self.op!r}")
        if len(self.args) != ARITY[self.op]:
            raise ValueError(f"{self.op} takes {ARITY[self.op]} argument(s), got {len(self.args)}")


Expr = Union[Const, Var, KeyRef, LoopVarRef, Call]


@dataclass(frozen=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True)
class Loop:
    var: str
    body: tuple[Assign, ...]


@dataclass(frozen=True)
class ReducerKernel:
    name: str
    init: tuple[Assign, ...]
    loop: Loop | None
    emit: Expr

    @property
    def loop_var(self) -> str | None:
        return self.loop.var if self.loop is not None else None

    @property
    def body(self) -> tuple[Assign, ...]:
        return self.loop.body if self.loop is not None else ()


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    stack = [expr]
    while stack:
        e = stack.pop()
        yield e
        if isinstance(e, Call):
            stack.extend(reversed(e.args))


def reads(expr: Expr) -> set[str]:
    """Variable names read by ``expr``."""
    return {e.name for e in walk(expr) if isinstance(e, Var)}


def uses_key(expr: Expr) -> bool:
    return any(isinstance(e, KeyRef) for e in walk(expr))


def uses_values(expr: Expr, op: str | None = None) -> bool:
    """True if ``expr`` touches the whole value list (``len``/``first``)."""
    return any(
        isinstance(e, Call) and e.op in VALUES_OPS and (op is None or e.op == op)
        for e in walk(expr)
    )


def uses_loop_var(expr: Expr) -> bool:
    return any(isinstance(e, LoopVarRef) for e in walk(expr))


def ops_used(expr: Expr) -> set[str]:
    return {e.op for e in walk(expr) if isinstance(e, Call)}


def substitute(expr: Expr, mapping: dict[Expr, Expr]) -> Expr:
    """Replace sub-expressions structurally equal to a mapping key."""
    if expr in mapping:
        return mapping[expr]
    if isinstance(expr, Call) and expr.args:
        return Call(expr.op, tuple(substitute(a, mapping) for a in expr.args))
    return expr
