"""The benchmark suite: synthetic inputs, benchmark definitions and the timing harness."""
from .datasets import SIZE_NAMES, SIZES, dump_input, generate, load_input
from .harness import BenchResult, IterationMetrics, execute_once, run_benchmark, sequential_time_ns
from .suite import BENCHMARKS, BenchmarkSpec, get

__all__ = [
    "BENCHMARKS",
    "BenchResult",
    "BenchmarkSpec",
    "IterationMetrics",
    "SIZES",
    "SIZE_NAMES",
    "dump_input",
    "execute_once",
    "generate",
    "get",
    "load_input",
    "run_benchmark",
    "sequential_time_ns",
]
