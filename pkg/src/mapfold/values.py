"""Tagged values flowing through the engine.

Values are plain Python objects: ``int`` (Int, 64-bit signed, wrapping),
``float`` (Float), ``str`` (Text) and ``tuple`` (Vec, homogeneous). Keeping
native objects avoids a boxing layer on the hot emit path; the helpers here
recover the tag and provide the canonical ordering used for deterministic
output.
"""
from __future__ import annotations

import enum
import math
import threading
from typing import Any, Iterable, Sequence

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1
_MASK = (1 << 64) - 1


class Tag(enum.Enum):
    INT = "Int"
    FLOAT = "Float"
    TEXT = "Text"
    VEC = "Vec"

    def __str__(self) -> str:
        return self.value


_TAG_RANK = {Tag.INT: 0, Tag.FLOAT: 1, Tag.TEXT: 2, Tag.VEC: 3}


def tag_of(value: Any) -> Tag:
    t = type(value)
    if t is int:
        return Tag.INT
    if t is float:
        return Tag.FLOAT
    if t is str:
        return Tag.TEXT
    if t is tuple:
        return Tag.VEC
    raise TypeError(f"not a mapfold value: {value!r} ({t.__name__})")


def check_value(value: Any) -> Any:
    """Return ``value`` unchanged if it is a well-formed Value, else raise TypeError."""
    tag = tag_of(value)
    if tag is Tag.INT and not INT_MIN <= value <= INT_MAX:
        raise TypeError(f"Int out of 64-bit range: {value}")
    if tag is Tag.VEC and value:
        first = tag_of(value[0])
        for item in value:
            check_value(item)
            if tag_of(item) is not first:
                raise TypeError(f"Vec elements must share one tag: {value!r}")
    return value


class _OverflowCounter:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def bump(self) -> None:
        with self._lock:
            self._count += 1

    @property
    def count(self) -> int:
        return self._count

    def reset(self) -> None:
        with self._lock:
            self._count = 0


#: Number of Int results that wrapped around since process start (or last reset).
overflow_events = _OverflowCounter()


def wrap_int(x: int) -> int:
    """Reduce an unbounded int to two's-complement 64-bit, counting wraps."""
    if INT_MIN <= x <= INT_MAX:
        return x
    overflow_events.bump()
    x &= _MASK
    return x - (1 << 64) if x > INT_MAX else x


def sort_key(value: Any) -> tuple:
    """Total order over Values: by tag (Int < Float < Text < Vec), then payload."""
    t = type(value)
    if t is int:
        return (0, value)
    if t is float:
        return (1, value)
    if t is str:
        return (2, value)
    if t is tuple:
        return (3, tuple(sort_key(v) for v in value))
    raise TypeError(f"not a mapfold value: {value!r}")


def pair_sort_key(pair: tuple[Any, Any]) -> tuple:
    return (sort_key(pair[0]), sort_key(pair[1]))


def canonical(pairs: Iterable[tuple[Any, Any]]) -> list[tuple[Any, Any]]:
    """Sort (key, value) pairs into the canonical order."""
    return sorted(pairs, key=pair_sort_key)


def values_close(a: Any, b: Any, rel: float = 1e-9) -> bool:
    """Structural equality; floats compare with relative tolerance ``rel``."""
    ta, tb = type(a), type(b)
    if ta is not tb:
        return False
    if ta is float:
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return a == b or math.isclose(a, b, rel_tol=rel, abs_tol=0.0)
    if ta is tuple:
        return len(a) == len(b) and all(values_close(x, y, rel) for x, y in zip(a, b))
    return a == b


def results_close(
    got: Sequence[tuple[Any, Any]], want: Sequence[tuple[Any, Any]], rel: float = 1e-9
) -> bool:
    """Compare two canonical result lists pairwise with :func:`values_close`."""
    if len(got) != len(want):
        return False
    return all(
        values_close(gk, wk, rel) and values_close(gv, wv, rel)
        for (gk, gv), (wk, wv) in zip(got, want)
    )


def format_value(value: Any) -> str:
    t = type(value)
    if t is float:
        return repr(value)
    if t is tuple:
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)
