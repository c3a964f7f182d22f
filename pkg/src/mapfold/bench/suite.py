"""The seven benchmarks: mappers, reducer kernels, drivers and oracles.

A benchmark's ``execute(data, runner, reducer)`` drives one or more MapReduce
jobs through ``runner(mapper, reducer, items)``; the runner decides flow,
worker count and timing. Oracles compute the same answer with plain loops and
numpy and share no aggregation code with the runtime.
"""
from __future__ import annotations

import functools
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from ..kernel import ReducerKernel, compile_reducer, parse_kernel
from ..runtime import Split
from . import datasets
from .datasets import SM_KEYS, Image, MatrixPair, Points

Runner = Callable[[Callable[[Split, Any], None], Any, Sequence[Any]], list]

#: K-means iterations per run.
KM_ITERATIONS = 5

# -- kernels ------------------------------------------------------------------------

SUM_KERNEL = """\
reducer {name}
let sum = 0
for v in values:
  sum = add(sum, v)
emit sum
"""

KMEANS_KERNEL = """\
reducer kmeans
let sum = [0.0, 0.0, 0.0]
let count = 0
for p in values:
  sum = vec_add(sum, p)
  count = add(count, 1)
emit vec_scale(sum, div(1.0, count))
"""

FIRST_KERNEL = """\
reducer matmul_row
emit first(values)
"""

COUNT_KERNEL = """\
reducer string_match
emit len(values)
"""

# -- word count ---------------------------------------------------------------------

WORD = re.compile(r"[A-Z][A-Z']*")


def wc_map(split: Split, emitter: Any) -> None:
    emit = emitter.emit
    for word in WORD.findall("\n".join(split.items).upper()):
        emit(word, 1)


def wc_execute(text: str, runner: Runner, reducer: Any) -> list:
    return runner(wc_map, reducer, text.splitlines())


def wc_oracle(text: str) -> list:
    counts: dict[str, int] = {}
    for token in WORD.findall(text.upper()):
        counts[token] = counts.get(token, 0) + 1
    return sorted(counts.items())


# -- histogram ----------------------------------------------------------------------

HG_BINS = 3 * 256


def hg_map(split: Split, emitter: Any) -> None:
    # Bin the whole split first and emit one partial count per non-empty bucket.
    rows = split.items
    offsets = np.array([0, 256, 512], dtype=np.int64)
    idx = (rows.reshape(-1, 3).astype(np.int64) + offsets).ravel()
    counts = np.bincount(idx, minlength=HG_BINS)
    emit = emitter.emit
    for bucket, count in enumerate(counts.tolist()):
        if count:
            emit(bucket, count)


def hg_execute(image: Image, runner: Runner, reducer: Any) -> list:
    return runner(hg_map, reducer, image.pixels)


def hg_oracle(image: Image) -> list:
    counts = [0] * HG_BINS
    flat = image.pixels.reshape(-1, 3)
    for channel in range(3):
        values, freq = np.unique(flat[:, channel], return_counts=True)
        for v, f in zip(values.tolist(), freq.tolist()):
            counts[channel * 256 + v] += f
    return [(b, c) for b, c in enumerate(counts) if c]


# -- k-means ------------------------------------------------------------------------


def km_map(split: Split, emitter: Any, centres: np.ndarray) -> None:
    pts = split.items
    # Squared distances summed coordinate by coordinate, as (n, k) planes.
    d = (pts[:, 0:1] - centres[:, 0]) ** 2
    for axis in range(1, pts.shape[1]):
        d += (pts[:, axis:axis + 1] - centres[:, axis]) ** 2
    emit = emitter.emit
    for cluster, point in zip(d.argmin(axis=1).tolist(), pts.tolist()):
        emit(cluster, tuple(point))


def km_execute(data: Points, runner: Runner, reducer: Any) -> list:
    centres = data.points[: data.clusters].copy()
    for _ in range(KM_ITERATIONS):
        mapper = functools.partial(km_map, centres=centres.copy())
        for cluster, mean in runner(mapper, reducer, data.points):
            centres[cluster] = mean
    return [(i, tuple(row)) for i, row in enumerate(centres.tolist())]


def km_oracle(data: Points) -> list:
    pts = data.points
    centres = [tuple(row) for row in pts[: data.clusters].tolist()]
    for _ in range(KM_ITERATIONS):
        c = np.array(centres)
        dist = np.stack([((pts - c[j]) ** 2).sum(axis=1) for j in range(len(c))], axis=1)
        assign = dist.argmin(axis=1)
        for j in range(len(c)):
            members = pts[assign == j]
            if len(members):
                total = members.sum(axis=0)
                centres[j] = tuple((total / len(members)).tolist())
    return list(enumerate(centres))


# -- linear regression --------------------------------------------------------------


def lr_map(split: Split, emitter: Any) -> None:
    x = split.items[:, 0]
    y = split.items[:, 1]
    emit = emitter.emit
    emit("SX", int(x.sum()))
    emit("SY", int(y.sum()))
    emit("SXX", int(np.dot(x, x)))
    emit("SYY", int(np.dot(y, y)))
    emit("SXY", int(np.dot(x, y)))


def lr_execute(pairs: np.ndarray, runner: Runner, reducer: Any) -> list:
    return runner(lr_map, reducer, pairs)


def lr_oracle(pairs: np.ndarray) -> list:
    sx = sy = sxx = syy = sxy = 0
    for x, y in pairs.tolist():
        sx += x
        sy += y
        sxx += x * x
        syy += y * y
        sxy += x * y
    return sorted({"SX": sx, "SY": sy, "SXX": sxx, "SYY": syy, "SXY": sxy}.items())


def lr_fit(sums: dict[str, int], n: int) -> tuple[float, float]:
    """Slope and intercept from the five regression sums."""
    denom = n * sums["SXX"] - sums["SX"] ** 2
    slope = (n * sums["SXY"] - sums["SX"] * sums["SY"]) / denom
    return slope, (sums["SY"] - slope * sums["SX"]) / n


# -- matrix multiply ----------------------------------------------------------------


def mm_map(split: Split, emitter: Any, b: np.ndarray) -> None:
    emit = emitter.emit
    for offset, row in enumerate((split.items @ b).tolist()):
        emit(split.start + offset, tuple(row))


def mm_execute(data: MatrixPair, runner: Runner, reducer: Any) -> list:
    return runner(functools.partial(mm_map, b=data.b), reducer, data.a)


def mm_oracle(data: MatrixPair) -> list:
    c = np.einsum("ik,kj->ij", data.a, data.b)
    return [(i, tuple(row)) for i, row in enumerate(c.tolist())]


# -- principal component analysis ---------------------------------------------------


def pc_row_sums(split: Split, emitter: Any) -> None:
    emit = emitter.emit
    for offset, total in enumerate(split.items.sum(axis=1).tolist()):
        emit(split.start + offset, total)


def pc_covariance(split: Split, emitter: Any, centred: np.ndarray) -> None:
    emit = emitter.emit
    block = split.items @ centred.T
    for offset, row in enumerate(block.tolist()):
        i = split.start + offset
        for j in range(i, len(row)):
            emit((i, j), row[j])


def pc_execute(matrix: np.ndarray, runner: Runner, reducer: Any) -> list:
    n = matrix.shape[1]
    sums = dict(runner(pc_row_sums, reducer, matrix))
    means = np.array([sums[i] // n for i in range(matrix.shape[0])], dtype=np.int64)
    centred = matrix - means[:, None]
    return runner(functools.partial(pc_covariance, centred=centred), reducer, centred)


def pc_oracle(matrix: np.ndarray) -> list:
    rows = matrix.tolist()
    n = len(rows[0])
    means = [sum(r) // n for r in rows]
    centred = np.array([[x - m for x in r] for r, m in zip(rows, means)], dtype=np.int64)
    cov = np.einsum("ik,jk->ij", centred, centred)
    return [((i, j), int(cov[i, j])) for i in range(len(rows)) for j in range(i, len(rows))]


# -- string match -------------------------------------------------------------------


def sm_map(split: Split, emitter: Any) -> None:
    emit = emitter.emit
    for line in split.items:
        for key in SM_KEYS:
            if key in line:
                emit(key, 1)


def sm_execute(text: str, runner: Runner, reducer: Any) -> list:
    return runner(sm_map, reducer, text.splitlines())


def sm_oracle(text: str) -> list:
    hits: Counter[str] = Counter()
    for key in SM_KEYS:
        n = len(re.findall(rf"^.*{re.escape(key)}.*$", text, flags=re.MULTILINE))
        if n:
            hits[key] = n
    return sorted(hits.items())


# -- registry -----------------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    id: str
    title: str
    kernel_source: str
    #: What the analyzer is expected to report for the kernel.
    expected_analysis: str
    execute: Callable[[Any, Runner, Any], list]
    oracle: Callable[[Any], list]

    def generate(self, size: str, seed: int) -> Any:
        return datasets.generate(self.id, size, seed)

    @property
    def kernel(self) -> ReducerKernel:
        return _parse(self.kernel_source)

    def opaque_reducer(self) -> Callable[[Any, list, Callable[[Any, Any], None]], None]:
        """A host-function reducer computing the same thing, hidden from the analyzer."""
        reduce = compile_reducer(self.kernel)

        def reducer(key: Any, values: list, emit: Callable[[Any, Any], None]) -> None:
            emit(key, reduce(key, values))

        return reducer


@functools.lru_cache(maxsize=None)
def _parse(source: str) -> ReducerKernel:
    return parse_kernel(source)


BENCHMARKS: dict[str, BenchmarkSpec] = {
    s.id: s
    for s in (
        BenchmarkSpec("hg", "Histogram", SUM_KERNEL.format(name="histogram"), "Combinable", hg_execute, hg_oracle),
        BenchmarkSpec("km", "K-Means Clustering", KMEANS_KERNEL, "Combinable", km_execute, km_oracle),
        BenchmarkSpec("lr", "Linear Regression", SUM_KERNEL.format(name="linear_regression"), "Combinable", lr_execute, lr_oracle),
        BenchmarkSpec("mm", "Matrix Multiply", FIRST_KERNEL, "Idiomatic(First)", mm_execute, mm_oracle),
        BenchmarkSpec("pc", "Principal Component Analysis", SUM_KERNEL.format(name="pca"), "Combinable", pc_execute, pc_oracle),
        BenchmarkSpec("sm", "String Match", COUNT_KERNEL, "Idiomatic(Count)", sm_execute, sm_oracle),
        BenchmarkSpec("wc", "Word Count", SUM_KERNEL.format(name="word_count"), "Combinable", wc_execute, wc_oracle),
    )
}


def get(bench: str) -> BenchmarkSpec:
    try:
        return BENCHMARKS[bench.lower()]
    except KeyError:
        raise ValueError(f"unknown benchmark {bench!r}; expected one of {sorted(BENCHMARKS)}") from None
