"""Insertion/deletion edit distance, computed through the longest common subsequence.

``d_e(x, y) = |x| + |y| - 2 * LCS(x, y)``.

:func:`lcs_length` runs the bit-vector form of the LCS recurrence (Hyyrö 2004)
on Python integers, one machine word per 64 columns.  :func:`lcs_length_dp` is
the plain two-row table, kept as a cross-check and for tiny inputs.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .bitcore import as_array

__all__ = [
    "lcs_length",
    "lcs_length_dp",
    "edit_distance",
    "edit_distance_banded",
]


def _pack(bits: np.ndarray) -> int:
    if bits.size == 0:
        return 0
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def lcs_length(x, y) -> int:
    a, b = as_array(x), as_array(y)
    if a.size < b.size:
        a, b = b, a  # loop over the shorter string
    n = a.size
    if n == 0 or b.size == 0:
        return 0
    ones = _pack(a)
    mask = (1 << n) - 1
    match = (ones ^ mask, ones)
    v = mask
    for c in b.tolist():
        u = v & match[c]
        v = ((v + u) | (v - u)) & mask
    return n - bin(v).count("1")


def lcs_length_dp(x, y) -> int:
    a, b = as_array(x), as_array(y)
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for c in a.tolist():
        cand = prev.copy()
        cand[1:] = np.maximum(prev[1:], prev[:-1] + (b == c))
        prev = np.maximum.accumulate(cand)
    return int(prev[-1])


def edit_distance(x, y) -> int:
    """Minimum number of single-bit deletions and insertions turning x into y."""
    a, b = as_array(x), as_array(y)
    return int(a.size + b.size - 2 * lcs_length(a, b))


def _shifted(row: np.ndarray, row_lo: int, cols: np.ndarray, fill: int) -> np.ndarray:
    idx = cols - row_lo
    ok = (idx >= 0) & (idx < row.size)
    out = np.full(cols.shape, fill, dtype=np.int64)
    out[ok] = row[idx[ok]]
    return out


def edit_distance_banded(x, y, band: int) -> Optional[int]:
    """Edit distance restricted to the diagonal band ``|i - j| <= band``.

    Returns the exact distance when it is at most ``band`` and ``None`` when
    the distance exceeds ``band``.  Any alignment of cost ``c`` stays within
    ``c`` of the main diagonal, so the band loses nothing below the cutoff.
    """
    a, b = as_array(x), as_array(y)
    n, m = a.size, b.size
    if band < 0:
        raise ValueError("band must be non-negative")
    if band < abs(n - m):
        return None  # the length difference alone exceeds the band
    inf = n + m + band + 1
    # row i holds columns lo..hi inclusive
    prev = np.arange(0, min(m, band) + 1, dtype=np.int64)
    prev_lo = 0
    for i in range(1, n + 1):
        lo, hi = max(0, i - band), min(m, i + band)
        cols = np.arange(lo, hi + 1)
        up = _shifted(prev, prev_lo, cols, inf) + 1
        diag = _shifted(prev, prev_lo, cols - 1, inf)
        match = np.zeros(cols.shape, dtype=bool)
        inner = cols >= 1
        match[inner] = b[cols[inner] - 1] == a[i - 1]
        cand = np.minimum(up, np.where(match, diag, inf))
        if lo == 0:
            cand[0] = i
        prev, prev_lo = np.minimum.accumulate(cand - cols) + cols, lo
    if m - prev_lo >= prev.size or m < prev_lo:
        return None
    d = int(prev[m - prev_lo])
    return d if d <= band else None
