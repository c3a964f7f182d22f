"""Shared-memory MapReduce that turns analyzable reducers into combiners.

Reducers written in a small kernel language are analyzed; when a reducer
folds its values with a per-key accumulator, the runtime derives an
initialize/combine/finalize triple and folds emissions as they arrive instead
of materialising per-key value lists.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DivisionByZero,
    EmitAfterSnapshot,
    KernelSyntaxError,
    KernelTypeError,
    MapfoldError,
    OracleMismatch,
    ValidationError,
)
from .kernel import ReducerKernel, interpret_reduce, parse_kernel, print_kernel
from .optimizer import (
    Combinable,
    CombinerTriple,
    Idiom,
    Idiomatic,
    NotCombinable,
    Reason,
    analyze,
    describe,
    fold_values,
    triple_combine,
    triple_finalize,
    triple_initialize,
)
from .runtime import Flow, FlowMode, Job, RunConfig, RunMetrics, Split, run, run_baseline_sequential
from .store import IntermediateStore, StoreStats

__all__ = [
    "Combinable",
    "CombinerTriple",
    "ConfigError",
    "DivisionByZero",
    "EmitAfterSnapshot",
    "Flow",
    "FlowMode",
    "Idiom",
    "Idiomatic",
    "IntermediateStore",
    "Job",
    "KernelSyntaxError",
    "KernelTypeError",
    "MapfoldError",
    "NotCombinable",
    "OracleMismatch",
    "Reason",
    "ReducerKernel",
    "RunConfig",
    "RunMetrics",
    "Split",
    "StoreStats",
    "ValidationError",
    "analyze",
    "describe",
    "fold_values",
    "interpret_reduce",
    "parse_kernel",
    "print_kernel",
    "run",
    "run_baseline_sequential",
    "triple_combine",
    "triple_finalize",
    "triple_initialize",
]
