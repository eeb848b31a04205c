"""Edit-distance codes built greedily, and nearest-codeword decoding.

All ``2**n`` strings of length ``n`` are held as integers (most significant
bit first, matching :meth:`BitString.to_int`).  The greedy builder repeatedly
picks a uniformly random survivor and deletes every survivor within the
exclusion radius of it.  Edit distances between equal-length strings are
``2 * (n - LCS)``; the LCS against all survivors at once uses the
bit-parallel recurrence on a ``uint64`` array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bitcore import BitString, RngHandle, as_array
from .editdist import lcs_length
from .reconstruct import PipelineParams, reconstruct

__all__ = [
    "EditCode",
    "build_code_greedy",
    "lcs_against_all",
    "pairwise_ok",
    "decode",
    "code_rate",
    "save_code",
    "load_code",
    "MAX_EXHAUSTIVE_N",
]

MAX_EXHAUSTIVE_N = 20


@dataclass(frozen=True)
class EditCode:
    n: int
    radius: int
    codewords: tuple[BitString, ...]
    construction_seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.codewords)

    def as_ints(self) -> np.ndarray:
        return np.array([c.to_int() for c in self.codewords], dtype=np.uint64)


def lcs_against_all(a: int, others: np.ndarray, n: int) -> np.ndarray:
    """LCS length of the ``n``-bit string ``a`` against each ``n``-bit integer in ``others``.

    Bit ``i`` of an integer holds character ``n-1-i``, i.e. the strings are
    reversed in the bit layout; reading ``a`` back to front keeps the
    reversal consistent on both sides.
    """
    mask = np.uint64((1 << n) - 1)
    b = others.astype(np.uint64)
    match = (~b & mask, b)  # positions holding 0, positions holding 1
    v = np.full(b.shape, mask, dtype=np.uint64)
    for i in range(n):
        u = v & match[(a >> i) & 1]
        v = ((v + u) | (v - u)) & mask
    return n - np.bitwise_count(v).astype(np.int64)


def build_code_greedy(n: int, radius: int, rng: RngHandle, max_codewords: Optional[int] = None) -> EditCode:
    """Greedy packing of ``{0,1}^n`` with pairwise edit distance above ``radius``.

    Each step draws ``rng.generator.integers(len(survivors))`` as an index into
    the survivors sorted by integer value.
    """
    if not 1 <= n <= MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive construction needs 1 <= n <= {MAX_EXHAUSTIVE_N}, got {n}")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    alive = np.ones(1 << n, dtype=bool)
    picks = []
    gen = rng.generator
    while max_codewords is None or len(picks) < max_codewords:
        survivors = np.flatnonzero(alive)
        if survivors.size == 0:
            break
        s = int(survivors[gen.integers(survivors.size)])
        picks.append(s)
        d = 2 * (n - lcs_against_all(s, survivors, n))
        alive[survivors[d <= radius]] = False
        alive[s] = False
    words = tuple(BitString.from_int(s, n) for s in picks)
    return EditCode(n, radius, words, rng.seed)


def pairwise_ok(code: EditCode) -> bool:
    """Every pair of distinct codewords is more than ``radius`` apart."""
    ints = code.as_ints()
    for i in range(len(ints) - 1):
        d = 2 * (code.n - lcs_against_all(int(ints[i]), ints[i + 1 :], code.n))
        if np.any(d <= code.radius):
            return False
    return True


def nearest(x_hat, code: EditCode) -> int:
    """Index of the codeword closest to ``x_hat`` (lowest index on ties)."""
    if not code.codewords:
        raise ValueError("code is empty")
    y = as_array(x_hat)
    dists = [code.n + y.size - 2 * lcs_length(c, y) for c in code.codewords]
    return int(np.argmin(dists))


def decode(trace_bundle: Sequence, code: EditCode, pipeline: PipelineParams, truth=None) -> BitString:
    """Reconstruct from the traces, then return the nearest codeword.

    ``truth`` is only passed through to the reconstruction (oracle strategy).
    """
    if not code.codewords:
        raise ValueError("code is empty")
    report = reconstruct(trace_bundle, pipeline, truth=truth)
    return code.codewords[nearest(report.x_hat, code)]


def code_rate(code: EditCode) -> float:
    if not code.codewords:
        raise ValueError("code is empty")
    return math.log2(len(code.codewords)) / code.n


def save_code(code: EditCode, path) -> None:
    lines = [f"{code.n} {code.radius} {len(code.codewords)}"] + [str(c) for c in code.codewords]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_code(path) -> EditCode:
    lines = Path(path).read_text(encoding="utf-8").split()
    if len(lines) < 3:
        raise ValueError("code file needs a header line 'n radius count'")
    n, radius, count = (int(v) for v in lines[:3])
    words = tuple(BitString(w) for w in lines[3:])
    if len(words) != count:
        raise ValueError(f"header announces {count} codewords, file has {len(words)}")
    if any(len(w) != n for w in words):
        raise ValueError(f"every codeword must have length {n}")
    return EditCode(n, radius, words)
