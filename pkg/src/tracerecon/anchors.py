"""Anchors, pseudo-anchors and the usefulness predicates built on them.

An anchor-type block is all zeros except for a single 1 exactly in its middle.
Pseudo-type blocks are any window of a given length with few ones; their
presence away from the anchor makes a neighbourhood ambiguous.  Lengths are
derived from ``log2(K2)`` and the constants ``c0, C8, C9``, and each one can be
overridden for small-scale runs.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .bitcore import as_array

__all__ = [
    "AnchorKind",
    "AnchorParams",
    "AnchorLengths",
    "AnchorHit",
    "desk_overrides",
    "TraceFlags",
    "scan",
    "scan_naive",
    "is_j_good",
    "is_j_spurious",
    "is_trace_useful",
    "window_flags",
    "source_useful",
    "source_super_useful",
]


class AnchorKind(enum.Enum):
    TRACE_ANCHOR = "trace-anchor"
    TRACE_PSEUDO = "trace-pseudo"
    ANCHOR = "anchor"
    PSEUDO = "pseudo"
    SUPER_ANCHOR = "super-anchor"


_EXACT = {AnchorKind.TRACE_ANCHOR, AnchorKind.ANCHOR, AnchorKind.SUPER_ANCHOR}


def _odd_floor(v: float) -> int:
    k = math.floor(v)
    return k if k % 2 else k - 1


@dataclass(frozen=True)
class AnchorLengths:
    trace_anchor_len: int
    trace_pseudo_len: int
    trace_pseudo_cap: int
    anchor_len: int
    pseudo_len: int
    pseudo_cap: int
    super_anchor_len: int
    super_pseudo_cap: int
    spurious_len: int
    spurious_max_ones: int


@dataclass(frozen=True)
class AnchorParams:
    """Anchor constants; ``overrides`` maps :class:`AnchorLengths` field names to values."""

    p: float
    K2: int
    c0: float = 0.005
    C8: float = 1.0
    C9: float = 2.0
    overrides: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.K2 < 2:
            raise ValueError(f"K2 must be at least 2, got {self.K2}")
        if not 0.0 < self.c0 < 0.01:
            raise ValueError(f"c0 must lie in (0, 0.01), got {self.c0}")
        if self.C8 <= 0 or self.C9 <= 0:
            raise ValueError("C8 and C9 must be positive")
        unknown = set(self.overrides) - set(AnchorLengths.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown anchor overrides: {sorted(unknown)}")
        L = self.lengths
        for name in ("trace_anchor_len", "anchor_len", "super_anchor_len"):
            if getattr(L, name) % 2 == 0 or getattr(L, name) < 3:
                raise ValueError(f"{name} must be odd and at least 3, got {getattr(L, name)}")
        if not L.trace_pseudo_len < L.trace_anchor_len:
            raise ValueError("trace_pseudo_len must be shorter than trace_anchor_len")
        if not L.pseudo_len < L.anchor_len < L.super_anchor_len:
            raise ValueError("need pseudo_len < anchor_len < super_anchor_len")
        if min(L.trace_pseudo_len, L.pseudo_len, L.spurious_len) < 1:
            raise ValueError("window lengths must be positive")

    @property
    def log_k2(self) -> float:
        return math.log2(self.K2)

    @cached_property
    def lengths(self) -> AnchorLengths:
        lg, p, C8, C9, c0 = self.log_k2, self.p, self.C8, self.C9, self.c0
        anchor_len = 4 * math.floor(C9 * lg / p) + 1
        base = dict(
            trace_anchor_len=2 * math.floor((2 + c0 * p / 4) * C9 * lg) + 1,
            trace_pseudo_len=math.ceil(C9 * lg),
            trace_pseudo_cap=math.floor(1.5 * C8 * lg),
            anchor_len=anchor_len,
            pseudo_len=math.ceil(2 * C9 * lg / p),
            pseudo_cap=math.floor(lg / p),
            # the formula can round below anchor_len; keep the super-anchor strictly longer
            super_anchor_len=max(_odd_floor((4 / p + c0) * C9 * lg), anchor_len + 2),
            super_pseudo_cap=math.floor(2 * C8 * lg / p),
            spurious_len=math.ceil(C9 * lg),
            spurious_max_ones=math.floor(lg / 2),
        )
        base.update(self.overrides)
        if "anchor_len" in self.overrides and "super_anchor_len" not in self.overrides:
            base["super_anchor_len"] = max(base["super_anchor_len"], base["anchor_len"] + 2)
        return AnchorLengths(**{k: int(v) for k, v in base.items()})

    def window_spec(self, kind: AnchorKind) -> tuple[int, Optional[int]]:
        """``(length, ones_cap)``; the cap is ``None`` for exact-one kinds."""
        L = self.lengths
        return {
            AnchorKind.TRACE_ANCHOR: (L.trace_anchor_len, None),
            AnchorKind.TRACE_PSEUDO: (L.trace_pseudo_len, L.trace_pseudo_cap),
            AnchorKind.ANCHOR: (L.anchor_len, None),
            AnchorKind.PSEUDO: (L.pseudo_len, L.pseudo_cap),
            AnchorKind.SUPER_ANCHOR: (L.super_anchor_len, None),
        }[kind]

    def describe(self) -> dict:
        d = dict(p=self.p, K2=self.K2, c0=self.c0, C8=self.C8, C9=self.C9)
        d.update(self.lengths.__dict__)
        d["overridden"] = sorted(self.overrides)
        return d


def desk_overrides(p: float, K2: int) -> dict:
    """Lengths that keep anchors observable in windows of ``2*K2`` bits.

    Trace-side anchors get about ``0.75*log2(K2)`` zeros on each side, source
    lengths scale by ``1/p``, sparse blocks must be all zeros, and the spurious
    check is switched off (an empty ones range), since at this scale almost
    every window would trip it.
    """
    lg = math.log2(K2)
    tal = 2 * round(0.75 * lg) + 1
    tpl = min(math.ceil(1.5 * lg), tal - 1)
    al = max(2 * round(tal / p / 2) + 1, tal)
    pl = min(max(tpl + 1, round(tpl / p)), al - 1)
    return dict(
        trace_anchor_len=tal,
        trace_pseudo_len=tpl,
        trace_pseudo_cap=0,
        anchor_len=al,
        pseudo_len=pl,
        pseudo_cap=0,
        super_anchor_len=al + 2,
        super_pseudo_cap=0,
        spurious_len=tpl,
        spurious_max_ones=1,
    )


@dataclass(frozen=True)
class AnchorHit:
    start: int
    stop: int
    kind: AnchorKind
    one_position: Optional[int] = None

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start, self.stop)

    def disjoint(self, other: "AnchorHit") -> bool:
        return self.stop <= other.start or other.stop <= self.start


def _window_ones(bits: np.ndarray, length: int) -> np.ndarray:
    cs = np.concatenate(([0], np.cumsum(bits, dtype=np.int64)))
    return cs[length:] - cs[:-length]


def _starts(bits: np.ndarray, length: int, cap: Optional[int]) -> np.ndarray:
    if bits.size < length:
        return np.zeros(0, dtype=np.int64)
    ones = _window_ones(bits, length)
    if cap is not None:
        return np.flatnonzero(ones <= cap)
    half = length // 2
    return np.flatnonzero((ones == 1) & (bits[half : bits.size - length + 1 + half] == 1))


def _hits(bits: np.ndarray, kind: AnchorKind, length: int, cap: Optional[int]) -> list[AnchorHit]:
    half = length // 2
    return [
        AnchorHit(int(s), int(s) + length, kind, int(s) + half if cap is None else None)
        for s in _starts(bits, length, cap)
    ]


def scan(w, kind: AnchorKind, params: AnchorParams) -> list[AnchorHit]:
    """All windows of ``w`` that are of the given kind, left to right."""
    bits = as_array(w)
    length, cap = params.window_spec(kind)
    if length > bits.size:
        raise ValueError(f"{kind.value} length {length} exceeds string length {bits.size}")
    return _hits(bits, kind, length, cap)


def scan_naive(w, kind: AnchorKind, params: AnchorParams) -> list[AnchorHit]:
    """Reference scanner: recount every window from scratch."""
    s = str(w) if not isinstance(w, str) else w
    length, cap = params.window_spec(kind)
    if length > len(s):
        raise ValueError(f"{kind.value} length {length} exceeds string length {len(s)}")
    out = []
    for a in range(len(s) - length + 1):
        block = s[a : a + length]
        if cap is None:
            if block.count("1") == 1 and block[length // 2] == "1":
                out.append(AnchorHit(a, a + length, kind, a + length // 2))
        elif block.count("1") <= cap:
            out.append(AnchorHit(a, a + length, kind))
    return out


def _unique_anchor(bits: np.ndarray, anchor: AnchorKind, pseudo: AnchorKind, params: AnchorParams) -> Optional[AnchorHit]:
    alen, _ = params.window_spec(anchor)
    plen, pcap = params.window_spec(pseudo)
    anchors = _hits(bits, anchor, alen, None)
    if len(anchors) != 1:
        return None
    hit = anchors[0]
    starts = _starts(bits, plen, pcap)
    # a pseudo window [s, s+plen) is disjoint from the anchor iff it ends before or starts after it
    if np.any((starts + plen <= hit.start) | (starts >= hit.stop)):
        return None
    return hit


def is_j_good(trace_window, params: AnchorParams) -> tuple[bool, Optional[AnchorHit]]:
    hit = _unique_anchor(as_array(trace_window), AnchorKind.TRACE_ANCHOR, AnchorKind.TRACE_PSEUDO, params)
    return hit is not None, hit


def is_j_spurious(trace_window, params: AnchorParams) -> bool:
    bits = as_array(trace_window)
    L = params.lengths
    if bits.size < L.spurious_len:
        return False
    ones = _window_ones(bits, L.spurious_len)
    return bool(np.any((ones >= 2) & (ones <= L.spurious_max_ones)))


@dataclass(frozen=True)
class TraceFlags:
    good: bool
    spurious: bool
    hit: Optional[AnchorHit] = None  # trace coordinates


def window_flags(segments: np.ndarray, params: AnchorParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise :func:`is_j_good` / :func:`is_j_spurious` for equal-length windows.

    Returns ``(good, spurious, one_position)``; ``one_position`` is -1 where
    the row is not good.
    """
    W = np.asarray(segments, dtype=np.uint8)
    rows, w = W.shape
    L = params.lengths
    cs = np.zeros((rows, w + 1), dtype=np.int32)
    np.cumsum(W, axis=1, out=cs[:, 1:])

    def ones(length):
        return cs[:, length:] - cs[:, :-length]

    good = np.zeros(rows, dtype=bool)
    pos = np.full(rows, -1, dtype=np.int64)
    tal, tpl = L.trace_anchor_len, L.trace_pseudo_len
    if w >= tal:
        half = tal // 2
        is_anchor = (ones(tal) == 1) & (W[:, half : w - tal + 1 + half] == 1)
        single = is_anchor.sum(axis=1) == 1
        a = is_anchor.argmax(axis=1)
        starts = np.arange(w - tpl + 1)[None, :]
        sparse = ones(tpl) <= L.trace_pseudo_cap
        away = (starts + tpl <= a[:, None]) | (starts >= a[:, None] + tal)
        good = single & ~(sparse & away).any(axis=1)
        pos[good] = a[good] + half
    spurious = np.zeros(rows, dtype=bool)
    if w >= L.spurious_len:
        o = ones(L.spurious_len)
        spurious = ((o >= 2) & (o <= L.spurious_max_ones)).any(axis=1)
    return good, spurious, pos


def is_trace_useful(outcome, traces: Sequence, params: AnchorParams, T: Optional[int] = None) -> tuple[bool, list[TraceFlags]]:
    """Count good and spurious traces among ``2..T`` and apply the thresholds.

    Good needs ``count >= p*T/2``; spurious needs ``count <= p**2 * T / 8``.
    Empty windows are neither.
    """
    T = len(traces) if T is None else T
    live = [(t, w) for t, w in enumerate(outcome.windows, start=2) if w is not None]
    flags = [TraceFlags(False, False)] * len(outcome.windows)
    if live:
        width = {w[1] - w[0] for _, w in live}
        if len(width) != 1:
            raise ValueError("windows must share one length")
        seg = np.stack([as_array(traces[t - 1])[a:b] for t, (a, b) in live])
        good, spur, pos = window_flags(seg, params)
        tal = params.lengths.trace_anchor_len
        for i, (t, (a, _)) in enumerate(live):
            hit = None
            if good[i]:
                c = a + int(pos[i])
                hit = AnchorHit(c - tal // 2, c + tal // 2 + 1, AnchorKind.TRACE_ANCHOR, c)
            flags[t - 2] = TraceFlags(bool(good[i]), bool(spur[i]), hit)
    n_good = sum(f.good for f in flags)
    n_spur = sum(f.spurious for f in flags)
    useful = n_good >= 0.5 * params.p * T and n_spur <= params.p**2 * T / 8
    return useful, flags


def _neighbourhood(x, pos: int, K2: int) -> np.ndarray:
    bits = as_array(x)
    if pos - K2 < 0 or pos + K2 >= bits.size:
        raise ValueError(f"window [{pos - K2}, {pos + K2}] outside string of length {bits.size}")
    return bits[pos - K2 : pos + K2 + 1]


def source_useful(x, pos: int, params: AnchorParams) -> bool:
    """Exactly one anchor in ``x[pos-K2 .. pos+K2]`` and no pseudo-anchor disjoint from it."""
    seg = _neighbourhood(x, pos, params.K2)
    return _unique_anchor(seg, AnchorKind.ANCHOR, AnchorKind.PSEUDO, params) is not None


def source_super_useful(x, pos: int, params: AnchorParams) -> bool:
    """A super-anchor centred at ``pos`` and no sparse block away from the anchor span.

    Sparse blocks have length ``pseudo_len`` and at most ``super_pseudo_cap`` ones;
    "away" means disjoint from the anchor-length span centred at ``pos``.  The
    anchor centred at ``pos`` must also be the only anchor in the neighbourhood.
    With formula lengths any second anchor already contains a sparse block, but
    with all-zero sparse blocks (the desk lengths) it need not.
    """
    K2 = params.K2
    seg = _neighbourhood(x, pos, K2)
    L = params.lengths
    h = L.super_anchor_len // 2
    lo, hi = max(0, K2 - h), min(seg.size, K2 + h + 1)
    if seg[K2] != 1 or int(seg[lo:hi].sum()) != 1:
        return False
    # the super-anchor may run past the neighbourhood; check the rest in x itself
    bits = as_array(x)
    if pos - h < 0 or pos + h >= bits.size or int(bits[pos - h : pos + h + 1].sum()) != 1:
        return False
    a = L.anchor_len // 2
    span = (K2 - a, K2 + a + 1)
    starts = _starts(seg, L.pseudo_len, L.super_pseudo_cap)
    if np.any((starts + L.pseudo_len <= span[0]) | (starts >= span[1])):
        return False
    return _starts(seg, L.anchor_len, None).size == 1
