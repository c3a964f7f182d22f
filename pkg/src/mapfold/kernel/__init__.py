"""Reducer kernel IR: data types, text format, interpreter and dependency graph."""
from .codegen import compile_reducer
from .depgraph import DepGraph, Edge, Node, Region, build_dep_graph
from .interp import eval_expr, interpret_reduce
from .ir import Assign, Call, Const, Expr, KeyRef, Loop, LoopVarRef, ReducerKernel, Var
from .syntax import format_expr, parse_kernel, print_kernel, validate_kernel

__all__ = [
    "Assign",
    "Call",
    "Const",
    "DepGraph",
    "Edge",
    "Expr",
    "KeyRef",
    "Loop",
    "LoopVarRef",
    "Node",
    "ReducerKernel",
    "Region",
    "Var",
    "build_dep_graph",
    "compile_reducer",
    "eval_expr",
    "format_expr",
    "interpret_reduce",
    "parse_kernel",
    "print_kernel",
    "validate_kernel",
]
