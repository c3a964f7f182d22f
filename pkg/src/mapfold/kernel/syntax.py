"""Text format for reducer kernels: parser, printer and validator.

Grammar, one statement per line, ``#`` starts a comment::

    kernel   := "reducer" NAME NEWLINE init* loop? emitStmt
    init     := "let" VAR "=" expr
    loop     := "for" VAR "in" "values" ":" NEWLINE (INDENT VAR "=" expr)+
    emitStmt := "emit" expr
    expr     := INT | FLOAT | VEC | VAR | "key" | "len(values)" | "first(values)"
              | OP "(" expr ("," expr)* ")"
    VEC      := "[" (const ("," const)*)? "]"

A kernel without a loop is accepted so the two idioms (``emit len(values)``
and ``emit first(values)``) can be written directly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from ..errors import KernelSyntaxError, ValidationError
from ..values import INT_MAX, INT_MIN, check_value, format_value
from .ir import (
    ARITY,
    BINARY_OPS,
    VALUES_OPS,
    Assign,
    Call,
    Const,
    Expr,
    KeyRef,
    Loop,
    LoopVarRef,
    ReducerKernel,
    Var,
    walk,
)

RESERVED = frozenset(
    {"reducer", "let", "for", "in", "values", "emit", "key"} | set(BINARY_OPS) | set(VALUES_OPS)
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<float>[-+]?(?:\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+))
  | (?P<int>[-+]?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],=:])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


@dataclass
class _Line:
    number: int
    indent: int
    toks: list[_Tok]
    end_col: int


def _tokenize(text: str) -> list[_Line]:
    lines = []
    for number, raw in enumerate(text.splitlines(), start=1):
        src = raw.split("#", 1)[0].rstrip()
        if not src.strip():
            continue
        indent = len(src) - len(src.lstrip(" \t"))
        toks: list[_Tok] = []
        pos = indent
        while pos < len(src):
            m = _TOKEN.match(src, pos)
            if m is None:
                raise KernelSyntaxError(number, pos + 1, "a token", src[pos])
            if m.lastgroup != "ws":
                toks.append(_Tok(m.lastgroup, m.group(), pos + 1))
            pos = m.end()
        lines.append(_Line(number, indent, toks, len(src) + 1))
    return lines


class _Cursor:
    def __init__(self, line: _Line) -> None:
        self.line = line
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.line.toks[self.i] if self.i < len(self.line.toks) else None

    def fail(self, expected: str) -> KernelSyntaxError:
        tok = self.peek()
        if tok is None:
            return KernelSyntaxError(self.line.number, self.line.end_col, expected, "end of line")
        return KernelSyntaxError(self.line.number, tok.col, expected, tok.text)

    def take(self, kind: str, text: str | None = None, expected: str | None = None) -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            raise self.fail(expected or (repr(text) if text else kind))
        self.i += 1
        return tok

    def accept(self, kind: str, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.kind == kind and tok.text == text:
            self.i += 1
            return True
        return False

    def end(self) -> None:
        if self.peek() is not None:
            raise self.fail("end of line")


def _number(tok: _Tok, line: int) -> Any:
    if tok.kind == "int":
        n = int(tok.text)
        if not INT_MIN <= n <= INT_MAX:
            raise KernelSyntaxError(line, tok.col, "a 64-bit integer", tok.text)
        return n
    return float(tok.text)


def _const(cur: _Cursor) -> Any:
    tok = cur.peek()
    if tok is not None and tok.kind in ("int", "float"):
        cur.i += 1
        return _number(tok, cur.line.number)
    if cur.accept("punct", "["):
        items = []
        if not cur.accept("punct", "]"):
            items.append(_const(cur))
            while cur.accept("punct", ","):
                items.append(_const(cur))
            cur.take("punct", "]", "',' or ']'")
        value = tuple(items)
        try:
            check_value(value)
        except TypeError as exc:
            raise ValidationError("HomogeneousVecRule", str(exc), cur.line.number) from None
        return value
    raise cur.fail("a constant")


def _expr(cur: _Cursor, loop_var: str | None) -> Expr:
    tok = cur.peek()
    if tok is None:
        raise cur.fail("an expression")
    if tok.kind in ("int", "float") or (tok.kind == "punct" and tok.text == "["):
        return Const(_const(cur))
    if tok.kind != "name":
        raise cur.fail("an expression")
    cur.i += 1
    name = tok.text
    if name == "key":
        return KeyRef()
    if name in VALUES_OPS:
        cur.take("punct", "(", "'('")
        cur.take("name", "values", "'values'")
        cur.take("punct", ")", "')'")
        return Call(name)
    if name in BINARY_OPS:
        cur.take("punct", "(", "'('")
        args = [_expr(cur, loop_var)]
        while cur.accept("punct", ","):
            args.append(_expr(cur, loop_var))
        cur.take("punct", ")", "',' or ')'")
        if len(args) != ARITY[name]:
            raise KernelSyntaxError(
                cur.line.number, tok.col, f"{ARITY[name]} arguments to {name}", str(len(args))
            )
        return Call(name, tuple(args))
    if name in RESERVED:
        raise KernelSyntaxError(cur.line.number, tok.col, "an expression", name)
    if loop_var is not None and name == loop_var:
        return LoopVarRef()
    return Var(name)


def _ident(cur: _Cursor, what: str) -> str:
    tok = cur.take("name", expected=what)
    if tok.text in RESERVED:
        raise KernelSyntaxError(cur.line.number, tok.col, what, tok.text)
    return tok.text


@dataclass
class _Stmt:
    kind: str  # let | for | assign | emit
    line: int
    var: str | None = None
    expr: Expr | None = None
    body: list["_Stmt"] = field(default_factory=list)


def _statement(line: _Line, loop_var: str | None) -> _Stmt:
    cur = _Cursor(line)
    head = cur.peek()
    if head is None:  # pragma: no cover - blank lines are dropped by the tokenizer
        raise cur.fail("a statement")
    if head.kind == "name" and head.text == "let":
        cur.i += 1
        var = _ident(cur, "a variable name")
        cur.take("punct", "=", "'='")
        expr = _expr(cur, loop_var)
        cur.end()
        return _Stmt("let", line.number, var, expr)
    if head.kind == "name" and head.text == "for":
        cur.i += 1
        var = _ident(cur, "a loop variable")
        cur.take("name", "in", "'in'")
        cur.take("name", "values", "'values'")
        cur.take("punct", ":", "':'")
        cur.end()
        return _Stmt("for", line.number, var)
    if head.kind == "name" and head.text == "emit":
        cur.i += 1
        expr = _expr(cur, loop_var)
        cur.end()
        return _Stmt("emit", line.number, expr=expr)
    if head.kind == "name" and head.text not in RESERVED:
        var = _ident(cur, "a variable name")
        cur.take("punct", "=", "'='")
        expr = _expr(cur, loop_var)
        cur.end()
        return _Stmt("assign", line.number, var, expr)
    raise cur.fail("'let', 'for', 'emit' or an assignment")


def parse_kernel(text: str) -> ReducerKernel:
    """Parse kernel source text into a validated :class:`ReducerKernel`."""
    lines = _tokenize(text)
    if not lines:
        raise KernelSyntaxError(1, 1, "'reducer'", "end of input")
    head = _Cursor(lines[0])
    if lines[0].indent:
        raise KernelSyntaxError(lines[0].number, 1, "'reducer' at column 1")
    head.take("name", "reducer", "'reducer'")
    name = _ident(head, "a kernel name")
    head.end()

    stmts: list[_Stmt] = []
    loop_var: str | None = None
    open_loop: _Stmt | None = None
    for line in lines[1:]:
        if line.indent:
            if open_loop is None:
                raise KernelSyntaxError(line.number, 1, "an unindented statement")
            stmt = _statement(line, loop_var)
            if stmt.kind == "emit":
                raise ValidationError("EmitInsideLoop", "emit must follow the loop", line.number)
            if stmt.kind == "for":
                raise ValidationError("SingleLoopRule", "nested loops are not allowed", line.number)
            if stmt.kind == "let":
                raise ValidationError("StatementOrderRule", "'let' inside the loop body", line.number)
            open_loop.body.append(stmt)
            continue
        if open_loop is not None and not open_loop.body:
            raise KernelSyntaxError(line.number, 1, "an indented loop body statement")
        # Emit and init references to the loop variable are scope errors, not LoopVarRefs.
        stmt = _statement(line, None)
        if stmt.kind == "assign":
            raise KernelSyntaxError(line.number, 1, "'let', 'for' or 'emit'", stmt.var or "")
        if stmt.kind == "for":
            if any(s.kind == "for" for s in stmts):
                raise ValidationError("SingleLoopRule", "a kernel has at most one loop", line.number)
            loop_var = stmt.var
            open_loop = stmt
        else:
            open_loop = None
        stmts.append(stmt)
    if open_loop is not None and not open_loop.body:
        raise KernelSyntaxError(lines[-1].number + 1, 1, "an indented loop body statement", "end of input")

    emits = [s for s in stmts if s.kind == "emit"]
    if not emits:
        raise ValidationError("MissingEmit", "kernel has no emit statement")
    if len(emits) > 1:
        raise ValidationError("SingleEmitRule", "exactly one emit is allowed", emits[1].line)
    if stmts[-1].kind != "emit":
        raise ValidationError("StatementOrderRule", "emit must be the last statement", stmts[-1].line)
    seen_loop = False
    for s in stmts:
        if s.kind == "for":
            seen_loop = True
        elif s.kind == "let" and seen_loop:
            raise ValidationError("StatementOrderRule", "'let' after the loop", s.line)

    init = tuple(Assign(s.var, s.expr) for s in stmts if s.kind == "let")
    loops = [s for s in stmts if s.kind == "for"]
    loop = None
    if loops:
        loop = Loop(loops[0].var, tuple(Assign(b.var, b.expr) for b in loops[0].body))
    kernel = ReducerKernel(name, init, loop, emits[0].expr)
    validate_kernel(kernel, _line_of={id(s.expr): s.line for s in stmts + [b for l in loops for b in l.body]})
    return kernel


def validate_kernel(k: ReducerKernel, _line_of: dict[int, int] | None = None) -> ReducerKernel:
    """Check well-formedness of a kernel built in code; returns it unchanged."""
    lines = _line_of or {}

    def check_name(name: str, what: str) -> None:
        if not isinstance(name, str) or not _IDENT.match(name) or name in RESERVED:
            raise ValidationError("NameRule", f"invalid {what} {name!r}")

    def check_expr(expr: Expr, defined: set[str], in_loop: bool) -> None:
        line = lines.get(id(expr))
        for e in walk(expr):
            if isinstance(e, LoopVarRef) and not in_loop:
                raise ValidationError("LoopVarScope", "loop variable used outside the loop", line)
            if isinstance(e, Var) and k.loop is not None and e.name == k.loop.var:
                raise ValidationError("LoopVarScope", f"{e.name!r} names the loop variable", line)
            if isinstance(e, Var) and e.name not in defined:
                raise ValidationError("UseBeforeDef", f"{e.name!r} read before assignment", line)
            if isinstance(e, Const):
                try:
                    check_value(e.value)
                except TypeError as exc:
                    raise ValidationError("ConstRule", str(exc), line) from None
            if not isinstance(e, (Const, Var, KeyRef, LoopVarRef, Call)):
                raise ValidationError("ExprRule", f"not an expression node: {e!r}", line)

    check_name(k.name, "kernel name")
    defined: set[str] = set()
    for a in k.init:
        check_name(a.var, "variable name")
        check_expr(a.expr, defined, in_loop=False)
        defined.add(a.var)
    if k.loop is not None:
        check_name(k.loop.var, "loop variable")
        if k.loop.var in defined:
            raise ValidationError("LoopVarScope", f"loop variable {k.loop.var!r} shadows a variable")
        if not k.loop.body:
            raise ValidationError("LoopBodyRule", "loop body is empty")
        for a in k.loop.body:
            check_name(a.var, "variable name")
            if a.var == k.loop.var:
                raise ValidationError("LoopVarScope", "assignment to the loop variable", lines.get(id(a.expr)))
            check_expr(a.expr, defined, in_loop=True)
            defined.add(a.var)
    check_expr(k.emit, defined, in_loop=False)
    return k


def format_expr(expr: Expr, loop_var: str | None = None) -> str:
    if isinstance(expr, Const):
        return format_value(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, KeyRef):
        return "key"
    if isinstance(expr, LoopVarRef):
        if loop_var is None:
            raise ValueError("loop variable reference outside a loop")
        return loop_var
    if isinstance(expr, Call):
        if expr.op in VALUES_OPS:
            return f"{expr.op}(values)"
        return f"{expr.op}(" + ", ".join(format_expr(a, loop_var) for a in expr.args) + ")"
    raise TypeError(f"not an expression: {expr!r}")


def print_kernel(k: ReducerKernel) -> str:
    """Canonical text for ``k``; :func:`parse_kernel` reads it back unchanged."""
    out = [f"reducer {k.name}"]
    out += [f"let {a.var} = {format_expr(a.expr)}" for a in k.init]
    if k.loop is not None:
        out.append(f"for {k.loop.var} in values:")
        out += [f"  {a.var} = {format_expr(a.expr, k.loop.var)}" for a in k.loop.body]
    out.append(f"emit {format_expr(k.emit)}")
    return "\n".join(out) + "\n"
