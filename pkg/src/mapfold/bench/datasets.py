"""Deterministic synthetic inputs for the benchmark suite.

Every generator is a pure function of ``(size, seed)``. Sizes follow a desk
scale: total input at most 64 KB for ``tiny``, 4 MB for ``small`` and 64 MB
for ``medium``. The per-benchmark numbers live in :data:`SIZES`.

Inputs can be dumped to and loaded from files so runs can be replayed:

* WC, SM: UTF-8 text.
* HG: 8-byte header (width, height as little-endian uint32) then raw RGB.
* MM: A then B, row-major little-endian int64. PC: one such matrix.
* LR: (x, y) rows as little-endian int64.
* KM: points as row-major little-endian float64, three per point.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

SIZE_NAMES = ("tiny", "small", "medium")

SIZES: dict[str, dict[str, dict[str, int]]] = {
    # text bytes, vocabulary size
    "wc": {
        "tiny": {"bytes": 16_000, "vocab": 1_000},
        "small": {"bytes": 512_000, "vocab": 4_096},
        "medium": {"bytes": 4_000_000, "vocab": 16_384},
    },
    # image width x height, 3 bytes per pixel
    "hg": {
        "tiny": {"width": 64, "height": 64},
        "small": {"width": 512, "height": 512},
        "medium": {"width": 2048, "height": 2048},
    },
    # 3-d points around `clusters` centres
    "km": {
        "tiny": {"points": 1_000, "clusters": 10},
        "small": {"points": 10_000, "clusters": 10},
        "medium": {"points": 100_000, "clusters": 100},
    },
    # (x, y) pairs
    "lr": {
        "tiny": {"points": 2_000},
        "small": {"points": 131_072},
        "medium": {"points": 2_000_000},
    },
    # two n x n matrices
    "mm": {"tiny": {"n": 64}, "small": {"n": 256}, "medium": {"n": 512}},
    # one n x n matrix
    "pc": {"tiny": {"n": 32}, "small": {"n": 128}, "medium": {"n": 512}},
    # candidate-line bytes
    "sm": {
        "tiny": {"bytes": 16_000},
        "small": {"bytes": 1_000_000},
        "medium": {"bytes": 8_000_000},
    },
}

#: KM coordinates are quantised to 1/KM_GRID.
KM_GRID = 1024

#: Search keys for string match.
SM_KEYS = ("helloworld", "howareyou", "ferrari", "whotheman")

_SALT = {name: i for i, name in enumerate(("wc", "hg", "km", "lr", "mm", "pc", "sm"), start=101)}


def _rng(bench: str, seed: int) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, _SALT[bench]])


def _params(bench: str, size: str) -> dict[str, int]:
    try:
        return SIZES[bench][size]
    except KeyError:
        raise ValueError(f"unknown size {size!r} for {bench}; expected one of {SIZE_NAMES}") from None


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8


@dataclass(frozen=True)
class Points:
    points: np.ndarray  # (n, 3) float64
    clusters: int


@dataclass(frozen=True)
class MatrixPair:
    a: np.ndarray
    b: np.ndarray


# -- generators ---------------------------------------------------------------------

_LETTERS = np.array(list("abcdefghijklmnopqrstuvwxyz"))


def _vocabulary(rng: np.random.Generator, size: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        n = int(rng.integers(2, 11))
        w = "".join(rng.choice(_LETTERS, n))
        r = rng.random()
        if r < 0.03:
            w += "'s"
        elif r < 0.05:
            w = w[:-1] + "'" + w[-1:]
        if w.upper() not in seen:
            seen.add(w.upper())
            words.append(w)
    return words


def gen_wc(size: str, seed: int) -> str:
    """Text whose word frequencies follow a Zipf law (exponent 1.1) over a fixed vocabulary."""
    p = _params("wc", size)
    rng = _rng("wc", seed)
    vocab = _vocabulary(rng, p["vocab"])
    ranks = np.arange(1, len(vocab) + 1, dtype=np.float64)
    probs = ranks ** -1.1
    probs /= probs.sum()
    avg = sum(len(w) + 1.3 for w in vocab[:200]) / 200
    n_words = int(p["bytes"] / avg)
    picks = rng.choice(len(vocab), size=n_words, p=probs)
    style = rng.random(n_words)
    punct = rng.random(n_words)
    line_len = rng.integers(6, 16, size=n_words // 6 + 2)
    out: list[str] = []
    line: list[str] = []
    li = 0
    for i, idx in enumerate(picks.tolist()):
        w = vocab[idx]
        s = style[i]
        if s < 0.1:
            w = w.capitalize()
        elif s < 0.12:
            w = w.upper()
        q = punct[i]
        if q < 0.06:
            w += ","
        elif q < 0.09:
            w += "."
        elif q < 0.095:
            w = f"{w} {int(q * 100000) % 2000}"
        line.append(w)
        if len(line) >= line_len[li]:
            out.append(" ".join(line))
            line = []
            li += 1
    if line:
        out.append(" ".join(line))
    text = "\n".join(out) + "\n"
    return text[: p["bytes"]].rsplit("\n", 1)[0] + "\n" if len(text) > p["bytes"] else text


def gen_hg(size: str, seed: int) -> Image:
    """A 24-bit raster: per-channel noise over a horizontal gradient."""
    p = _params("hg", size)
    rng = _rng("hg", seed)
    w, h = p["width"], p["height"]
    pixels = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    gradient = (np.arange(w, dtype=np.uint16) * 256 // max(w, 1)).astype(np.uint8)
    pixels[:, :, 0] = (pixels[:, :, 0].astype(np.uint16) + gradient[None, :]).astype(np.uint8)
    return Image(w, h, pixels)


def gen_km(size: str, seed: int) -> Points:
    """Gaussian blobs in [10, 90]^3 in random order; the first ``clusters`` points seed the centres.

    Coordinates are multiples of 1/1024, so coordinate sums are exact and do
    not depend on the order in which map tasks add them up.
    """
    p = _params("km", size)
    rng = _rng("km", seed)
    k = p["clusters"]
    centres = rng.uniform(20.0, 80.0, size=(k, 3))
    labels = rng.integers(0, k, size=p["points"])
    pts = centres[labels] + rng.normal(0.0, 3.0, size=(p["points"], 3))
    np.clip(pts, 10.0, 90.0, out=pts)
    return Points(np.round(pts * KM_GRID) / KM_GRID, k)


def gen_lr(size: str, seed: int) -> np.ndarray:
    """Byte-valued (x, y) pairs scattered around a line."""
    p = _params("lr", size)
    rng = _rng("lr", seed)
    x = rng.integers(0, 256, size=p["points"])
    noise = rng.integers(-20, 21, size=p["points"])
    y = np.clip((3 * x) // 4 + 17 + noise, 0, 255)
    return np.stack([x, y], axis=1).astype(np.int64)


def gen_mm(size: str, seed: int) -> MatrixPair:
    n = _params("mm", size)["n"]
    rng = _rng("mm", seed)
    return MatrixPair(
        rng.integers(0, 100, size=(n, n), dtype=np.int64),
        rng.integers(0, 100, size=(n, n), dtype=np.int64),
    )


def gen_pc(size: str, seed: int) -> np.ndarray:
    n = _params("pc", size)["n"]
    rng = _rng("pc", seed)
    return rng.integers(0, 100, size=(n, n), dtype=np.int64)


def gen_sm(size: str, seed: int) -> str:
    """Random lowercase lines; roughly one in 100 embeds one of :data:`SM_KEYS`."""
    p = _params("sm", size)
    rng = _rng("sm", seed)
    n_lines = p["bytes"] // 17
    lengths = rng.integers(8, 25, size=n_lines)
    letters = rng.choice(_LETTERS, size=int(lengths.sum()))
    inject = rng.random(n_lines)
    which = rng.integers(0, len(SM_KEYS), size=n_lines)
    lines: list[str] = []
    pos = 0
    for i, n in enumerate(lengths.tolist()):
        line = "".join(letters[pos:pos + n])
        pos += n
        if inject[i] < 0.01:
            cut = int(inject[i] * 1e6) % (n + 1)
            line = line[:cut] + SM_KEYS[which[i]] + line[cut:]
        lines.append(line)
    return "\n".join(lines) + "\n"


GENERATORS = {
    "wc": gen_wc,
    "hg": gen_hg,
    "km": gen_km,
    "lr": gen_lr,
    "mm": gen_mm,
    "pc": gen_pc,
    "sm": gen_sm,
}


def generate(bench: str, size: str, seed: int) -> Any:
    return GENERATORS[bench](size, seed)


# -- files --------------------------------------------------------------------------


def _square(data: np.ndarray, count: int) -> tuple[int, ...]:
    n = int(round((data.size / count) ** 0.5))
    if n * n * count != data.size:
        raise ValueError("file does not hold square matrices")
    return (count, n, n)


def dump_input(bench: str, data: Any, path: str | Path) -> None:
    path = Path(path)
    if bench in ("wc", "sm"):
        path.write_text(data, encoding="utf-8")
    elif bench == "hg":
        path.write_bytes(struct.pack("<II", data.width, data.height) + data.pixels.tobytes())
    elif bench == "km":
        path.write_bytes(data.points.astype("<f8").tobytes())
    elif bench in ("lr", "pc"):
        path.write_bytes(np.asarray(data).astype("<i8").tobytes())
    elif bench == "mm":
        path.write_bytes(data.a.astype("<i8").tobytes() + data.b.astype("<i8").tobytes())
    else:
        raise ValueError(f"unknown benchmark {bench!r}")


def load_input(bench: str, path: str | Path, clusters: int | None = None) -> Any:
    path = Path(path)
    if bench in ("wc", "sm"):
        return path.read_text(encoding="utf-8")
    raw = path.read_bytes()
    if bench == "hg":
        w, h = struct.unpack_from("<II", raw)
        pixels = np.frombuffer(raw, dtype=np.uint8, offset=8).reshape(h, w, 3).copy()
        return Image(w, h, pixels)
    if bench == "km":
        if clusters is None:
            raise ValueError("KM files carry no cluster count; pass clusters=")
        return Points(np.frombuffer(raw, dtype="<f8").reshape(-1, 3).astype(np.float64), clusters)
    if bench == "lr":
        return np.frombuffer(raw, dtype="<i8").reshape(-1, 2).astype(np.int64)
    data = np.frombuffer(raw, dtype="<i8").astype(np.int64)
    if bench == "pc":
        return data.reshape(_square(data, 1)[1:])
    if bench == "mm":
        _, n, _ = _square(data, 2)
        return MatrixPair(data[: n * n].reshape(n, n), data[n * n:].reshape(n, n))
    raise ValueError(f"unknown benchmark {bench!r}")
