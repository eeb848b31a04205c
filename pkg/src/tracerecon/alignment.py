"""Iterative alignment of every trace against a neighbourhood of trace 1.

Interval lengths shrink as ``L_1 = isqrt(n)``, ``L_{r+1} = isqrt(L_r)`` until
``L_R <= K1``.  At level ``r`` the reference block of trace 1 is
``[j - 2 L_r, j - L_r)``.  In trace ``t`` the leftmost length-``L_r`` interval
that passes the block test is located (anywhere in the trace at level 1, and
inside the previous follow-on window afterwards).  If it ends at ``b`` the
follow-on window is ``[b, b + 2 L_r)``.

All intervals are half-open, so the final windows have length ``2 K2`` and
correspond to ``[j - K2, j + K2)`` in trace 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bitcore import as_array
from .blocktest import TestParams, block_majorities, block_schedule, min_agreements, sliding_majority
from .channel import TraceRecord

__all__ = [
    "AlignSchedule",
    "AlignmentOutcome",
    "Aligner",
    "build_schedule",
    "align",
    "leftmost_match",
    "best_match",
    "provenance_offsets",
    "is_on_track",
]

Interval = tuple[int, int]


@dataclass(frozen=True)
class AlignSchedule:
    levels: tuple[int, ...]
    K1: int

    @property
    def R(self) -> int:
        return len(self.levels)

    @property
    def K2(self) -> int:
        return self.levels[-1]


def build_schedule(n: int, K1: int) -> AlignSchedule:
    if K1 < 4:
        raise ValueError(f"K1 must be at least 4, got {K1}")
    if K1 > n:
        raise ValueError(f"K1={K1} exceeds n={n}; alignment is unnecessary")
    levels = [math.isqrt(n)]
    while levels[-1] > K1:
        levels.append(math.isqrt(levels[-1]))
    return AlignSchedule(tuple(levels), K1)


@dataclass(frozen=True)
class AlignmentOutcome:
    """Result of aligning traces ``2..T`` at index ``j`` of trace 1.

    ``windows[t - 2]`` is the final follow-on window of trace ``t`` or ``None``;
    ``intervals[t - 2]`` lists the matched interval at each level reached.
    """

    j: int
    windows: tuple[Optional[Interval], ...]
    anchor_window_1: Interval
    schedule: AlignSchedule
    intervals: tuple[tuple[Interval, ...], ...] = field(repr=False, default=())

    def window(self, t: int) -> Optional[Interval]:
        """Window of trace ``t`` (1-based, ``t >= 2``)."""
        return self.windows[t - 2]

    @property
    def found(self) -> int:
        return sum(w is not None for w in self.windows)


def leftmost_match(
    smaj: np.ndarray, ref: np.ndarray, length: int, threshold: int, lo: int, hi: int, chunk: int = 512
) -> Optional[int]:
    """Smallest start ``s`` in ``[lo, hi]`` whose blocks agree with ``ref`` often enough.

    ``smaj`` is the sliding majority of the trace at block length ``length``;
    block ``b`` of the interval starting at ``s`` has majority ``smaj[s + b*length]``.
    """
    count = ref.size
    hi = min(hi, smaj.size - 1 - (count - 1) * length)
    s0 = max(lo, 0)
    while s0 <= hi:
        s1 = min(hi, s0 + chunk - 1)
        width = s1 - s0 + 1
        agree = np.zeros(width, dtype=np.int32)
        for b in range(count):
            base = s0 + b * length
            agree += smaj[base : base + width] == ref[b]
        hits = np.flatnonzero(agree >= threshold)
        if hits.size:
            return s0 + int(hits[0])
        s0 = s1 + 1
        chunk *= 2
    return None


def best_match(
    smaj: np.ndarray, ref: np.ndarray, length: int, threshold: int, lo: int, hi: int, expected: Optional[int] = None
) -> Optional[int]:
    """Start in ``[lo, hi]`` with the most agreeing blocks, if it passes.

    Ties go to the start nearest ``expected`` (leftmost when not given).
    """
    count = ref.size
    hi = min(hi, smaj.size - 1 - (count - 1) * length)
    lo = max(lo, 0)
    if lo > hi:
        return None
    width = hi - lo + 1
    agree = np.zeros(width, dtype=np.int32)
    for b in range(count):
        base = lo + b * length
        agree += smaj[base : base + width] == ref[b]
    top = int(agree.max())
    if top < threshold:
        return None
    ties = np.flatnonzero(agree == top)
    if expected is None:
        return lo + int(ties[0])
    return lo + int(ties[np.argmin(np.abs(ties + lo - expected))])


_RULES = ("leftmost", "best")


class Aligner:
    """Aligns a fixed set of traces at many indices of trace 1.

    Sliding block majorities are computed once per trace and level, so repeated
    calls at different ``j`` only pay for the searches.  ``search_radius``
    restricts the level-1 search to starts within that distance of the
    position ``j - 2 L_1`` scaled to trace ``t``'s length; ``None`` searches the
    whole trace.

    ``rule="best"`` is an experimental variant: instead of the leftmost
    passing interval it takes the one with the highest agreement count, ties
    going to the start nearest the position predicted by length scaling.
    """

    def __init__(
        self,
        traces: Sequence,
        schedule: AlignSchedule,
        test: TestParams,
        search_radius: Optional[int] = None,
        rule: str = "leftmost",
    ):
        if rule not in _RULES:
            raise ValueError(f"unknown match rule {rule!r}; choose from {sorted(_RULES)}")
        self.rule = rule
        self.traces = [as_array(u) for u in traces]
        self.schedule = schedule
        self.test = test
        self.search_radius = search_radius
        # leftmost matches are usually found early; search grows geometrically from here
        self.first_chunk = 32
        self._blocks = [block_schedule(L, test.alpha) for L in schedule.levels]
        self._thresholds = [min_agreements(c, test.kappa0) for c, _ in self._blocks]
        self._smaj = [
            [sliding_majority(u, length) for _, length in self._blocks] for u in self.traces[1:]
        ]
        # per level, the sliding majorities of all traces padded into one matrix;
        # the pad value 2 never equals a reference majority
        self._sizes = np.array([u.size for u in self.traces[1:]], dtype=np.int64)
        self._padded = []
        for r in range(len(schedule.levels)):
            width = max((sm[r].size for sm in self._smaj), default=0) + 1
            S = np.full((len(self._smaj), width), 2, dtype=np.uint8)
            for t, sm in enumerate(self._smaj):
                S[t, : sm[r].size] = sm[r]
            self._padded.append(S)
        # with at most 64 blocks, the majorities seen from each start fit in one word:
        # agreements = count - popcount(code ^ ref_code)
        self._codes = []
        for r, (count, length) in enumerate(self._blocks):
            if count > 64 or rule != "leftmost":
                self._codes.append(None)
                continue
            S = self._padded[r]
            codes = np.zeros(S.shape, dtype=np.uint64)
            for b in range(count):
                shifted = np.zeros(S.shape, dtype=np.uint64)
                shifted[:, : max(0, S.shape[1] - b * length)] = S[:, b * length :] & 1
                codes |= shifted << np.uint64(b)
            self._codes.append(codes)

    def check_index(self, j: int) -> None:
        first = self.traces[0]
        L1, K2 = self.schedule.levels[0], self.schedule.K2
        if j - 2 * L1 < 0 or j + K2 > first.size:
            raise ValueError(f"j={j} outside [{2 * L1}, {first.size - K2}] for trace 1 of length {first.size}")

    def _refs(self, j: int) -> list[np.ndarray]:
        first = self.traces[0]
        return [
            block_majorities(first[j - 2 * L : j - L], count, length)
            for L, (count, length) in zip(self.schedule.levels, self._blocks)
        ]

    def _outcome(self, j, windows, intervals) -> AlignmentOutcome:
        K2 = self.schedule.K2
        return AlignmentOutcome(j, tuple(windows), (j - K2, j + K2), self.schedule, tuple(intervals))

    def align(self, j: int) -> AlignmentOutcome:
        if self.rule != "leftmost":
            return self.align_each(j)
        self.check_index(j)
        refs = self._refs(j)
        levels = self.schedule.levels
        first = self.traces[0]
        sizes = self._sizes
        rows = np.arange(sizes.size)
        if self.search_radius is None:
            lo = np.zeros(sizes.size, dtype=np.int64)
            last = sizes - levels[0]
        else:
            centre = np.rint((j - 2 * levels[0]) * sizes / first.size).astype(np.int64)
            lo = np.maximum(0, centre - self.search_radius)
            last = np.minimum(centre + self.search_radius, sizes - levels[0])
        found = np.zeros((sizes.size, len(levels)), dtype=np.int64)
        depth = np.zeros(sizes.size, dtype=np.int64)
        chunk = self.first_chunk
        for r, L in enumerate(levels):
            s = self._leftmost_rows(r, refs[r], rows, lo[rows], last[rows], chunk)
            hit = s >= 0
            rows, s = rows[hit], s[hit]
            found[rows, r] = s
            depth[rows] = r + 1
            if r + 1 < len(levels):
                nxt = levels[r + 1]
                lo = np.zeros(sizes.size, dtype=np.int64)
                last = np.zeros(sizes.size, dtype=np.int64)
                lo[rows] = s + L
                last[rows] = np.minimum(s + 3 * L, sizes[rows]) - nxt
        K2 = self.schedule.K2
        windows, intervals = [], []
        for t in range(sizes.size):
            intervals.append(tuple((int(found[t, r]), int(found[t, r]) + levels[r]) for r in range(depth[t])))
            w = None
            if depth[t] == len(levels):
                a = int(found[t, -1]) + K2
                if a + 2 * K2 <= sizes[t]:
                    w = (a, a + 2 * K2)
            windows.append(w)
        return self._outcome(j, windows, intervals)

    def _leftmost_rows(self, r, ref, rows, lo, last, chunk) -> np.ndarray:
        """Leftmost passing start per row in ``[lo, last]``; -1 where there is none."""
        S = self._padded[r]
        codes = self._codes[r]
        count, length = self._blocks[r]
        thr = self._thresholds[r]
        width = S.shape[1]
        if codes is not None:
            ref_code = np.uint64(sum(int(v) << b for b, v in enumerate(ref)))
        out = np.full(rows.size, -1, dtype=np.int64)
        active = np.flatnonzero(lo <= last)
        s0 = lo.copy()
        while active.size:
            starts = s0[active, None] + np.arange(chunk)
            valid = starts <= last[active, None]
            tr = rows[active, None]
            if codes is not None:
                diff = codes[tr, np.minimum(starts, width - 1)] ^ ref_code
                agree = count - np.bitwise_count(diff).astype(np.int32)
            else:
                agree = np.zeros(starts.shape, dtype=np.int32)
                for b in range(count):
                    idx = np.minimum(starts + b * length, width - 1)
                    agree += S[tr, idx] == ref[b]
            passing = (agree >= thr) & valid
            any_pass = passing.any(axis=1)
            firsts = passing.argmax(axis=1)
            out[active[any_pass]] = starts[any_pass, firsts[any_pass]]
            done = any_pass | ~valid[:, -1]
            s0[active] += chunk
            active = active[~done]
            chunk *= 2
        return out

    def align_each(self, j: int) -> AlignmentOutcome:
        """Trace-by-trace alignment; supports both rules (reference for :meth:`align`)."""
        self.check_index(j)
        first = self.traces[0]
        levels = self.schedule.levels
        refs = self._refs(j)
        windows, intervals = [], []
        for t, u in enumerate(self.traces[1:]):
            found: list[Interval] = []
            lo, hi = 0, u.size
            if self.search_radius is not None:
                centre = round((j - 2 * levels[0]) * u.size / first.size)
                lo, hi = max(0, centre - self.search_radius), centre + self.search_radius + levels[0]
            window = None
            scale = u.size / first.size
            expected = round((j - 2 * levels[0]) * scale)
            for r, L in enumerate(levels):
                hi = min(hi, u.size)
                args = (self._smaj[t][r], refs[r], self._blocks[r][1], self._thresholds[r], lo, hi - L)
                if self.rule == "leftmost":
                    s = leftmost_match(*args)
                else:
                    s = best_match(*args, expected=expected)
                if s is None:
                    break
                found.append((s, s + L))
                lo, hi = s + L, s + 3 * L
                if r + 1 < len(levels):
                    expected = lo + round((L - 2 * levels[r + 1]) * scale)
            else:
                if hi <= u.size:
                    window = (lo, hi)
            windows.append(window)
            intervals.append(tuple(found))
        return self._outcome(j, windows, intervals)


def align(
    traces: Sequence,
    j: int,
    schedule: AlignSchedule,
    test: TestParams,
    search_radius: Optional[int] = None,
    rule: str = "leftmost",
) -> AlignmentOutcome:
    """Align traces ``2..T`` to index ``j`` of ``traces[0]``."""
    return Aligner(traces, schedule, test, search_radius, rule).align(j)


def provenance_offsets(outcome: AlignmentOutcome, records: Sequence[TraceRecord]) -> list[Optional[np.ndarray]]:
    """Per trace ``t >= 2``: ``g_t(l_t + k) - g_1(l_1 + k)`` for ``k < 2 K2``, or ``None``."""
    a1, b1 = outcome.anchor_window_1
    ref = records[0].origin[a1:b1].astype(np.int64)
    out = []
    for t, w in enumerate(outcome.windows):
        if w is None:
            out.append(None)
        else:
            out.append(records[t + 1].origin[w[0] : w[1]].astype(np.int64) - ref)
    return out


def is_on_track(outcome: AlignmentOutcome, records: Sequence[TraceRecord], beta: float) -> bool:
    """All windows found and every provenance offset within ``K2 ** (1 - beta/2)``."""
    bound = outcome.schedule.K2 ** (1 - beta / 2)
    offsets = provenance_offsets(outcome, records)
    return all(d is not None and np.abs(d).max() <= bound for d in offsets)
