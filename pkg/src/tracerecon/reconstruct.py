"""End-to-end approximate reconstruction from a bundle of traces.

Trace 1 is scanned left to right over a fraction of its length.  At each index
``j`` the other traces are aligned to it; when enough of them show a single
clean trace-anchor (and few show spurious sparse blocks) the bits following
each anchor are handed to a prefix strategy, which returns one chunk.  The
scan then jumps ahead by ``spacing``.  The output is the concatenation of the
chunks in scan order.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .alignment import Aligner, AlignSchedule, build_schedule
from .anchors import AnchorParams, desk_overrides, is_trace_useful
from .bitcore import BitString, as_array
from .blocktest import TestParams
from .channel import ChannelParams, TraceRecord
from .editdist import edit_distance, edit_distance_banded
from .prefixrecon import DEFAULT_STRATEGY, PrefixTask, get_strategy, reconstruct_prefix

__all__ = [
    "PipelineParams",
    "ChunkInfo",
    "Metrics",
    "ReconstructionReport",
    "reconstruct",
    "evaluate",
    "prune_overlaps",
]


@dataclass(frozen=True)
class PipelineParams:
    """Every constant of the pipeline.

    ``chunk_len`` and ``spacing`` default to ``ceil(K2**C10)`` and
    ``ceil(p*K2**C10 + p*K2**(3*C10/4))`` once ``K2`` is known.  With
    ``desk_anchors`` set, anchor lengths come from
    :func:`~tracerecon.anchors.desk_overrides` unless ``anchor_overrides`` is given.
    """

    channel: ChannelParams
    test: TestParams = field(default_factory=TestParams)
    T: int = 8
    K1: int = 64
    C10: float = 1.5
    c0: float = 0.005
    C8: float = 1.0
    C9: float = 2.0
    desk_anchors: bool = True
    anchor_overrides: Optional[dict] = field(default=None, hash=False, compare=False)
    chunk_len: Optional[int] = None
    spacing: Optional[int] = None
    eps: float = 0.1
    j_range: Optional[tuple[float, float]] = None
    min_n_guard: int = 1024
    strategy: str = DEFAULT_STRATEGY
    full_string: bool = False
    search_radius: Optional[int] = None
    match_rule: str = "leftmost"

    def __post_init__(self):
        if self.T < 2:
            raise ValueError(f"T must be at least 2, got {self.T}")
        if self.K1 < 4:
            raise ValueError(f"K1 must be at least 4, got {self.K1}")
        if self.C10 <= 0:
            raise ValueError(f"C10 must be positive, got {self.C10}")
        if not 0.0 < self.eps < 1 / math.sqrt(2):
            raise ValueError(f"eps must lie in (0, 0.707), got {self.eps}")
        lo, hi = self.scan_fractions
        if not 0.0 < lo < hi <= 1.0:
            raise ValueError(f"j_range must satisfy 0 < start < end <= 1, got {(lo, hi)}")
        if self.chunk_len is not None and self.chunk_len < 1:
            raise ValueError("chunk_len must be at least 1")
        if self.spacing is not None and self.spacing < 1:
            raise ValueError("spacing must be positive")
        get_strategy(self.strategy)

    @classmethod
    def theory_scale(cls, q: float, eps: float, **kw) -> "PipelineParams":
        """``K1 = (1/eps)**100`` and formula anchor lengths; only usable for huge ``n``."""
        return cls(ChannelParams(q), K1=math.ceil((1 / eps) ** 100), eps=eps, desk_anchors=False, **kw)

    @property
    def p(self) -> float:
        return self.channel.p

    @property
    def scan_fractions(self) -> tuple[float, float]:
        if self.j_range is not None:
            return self.j_range
        return (self.eps**2, 0.5 - self.eps**2)

    def schedule(self, n: int) -> AlignSchedule:
        return build_schedule(n, self.K1)

    def anchors(self, K2: int) -> AnchorParams:
        if self.anchor_overrides is not None:
            ov = self.anchor_overrides
        elif self.desk_anchors:
            ov = desk_overrides(self.p, K2)
        else:
            ov = {}
        return AnchorParams(self.p, K2, self.c0, self.C8, self.C9, overrides=dict(ov))

    def chunk_length(self, K2: int) -> int:
        return self.chunk_len if self.chunk_len is not None else math.ceil(K2**self.C10)

    def chunk_spacing(self, K2: int) -> int:
        if self.spacing is not None:
            return self.spacing
        k = K2**self.C10
        return math.ceil(self.p * k + self.p * k**0.75)

    def describe(self) -> dict:
        d = {
            "q": self.channel.q,
            "alpha": self.test.alpha,
            "kappa0": self.test.kappa0,
            "beta": self.test.beta,
            "lam": self.test.lam,
            "desk_override": self.test.desk_override,
        }
        for name in (
            "T", "K1", "C10", "c0", "C8", "C9", "desk_anchors", "chunk_len", "spacing", "eps",
            "min_n_guard", "strategy", "full_string", "search_radius", "match_rule",
        ):
            d[name] = getattr(self, name)
        d["j_range"] = list(self.scan_fractions)
        d["anchor_overrides"] = self.anchor_overrides
        return d


@dataclass(frozen=True)
class ChunkInfo:
    j: int  # index in trace 1 (in the reversed traces for reverse-pass chunks)
    length: int
    strategy: str
    good: tuple[bool, ...]
    offset: int  # position of the chunk in x_hat
    reverse: bool = False
    source_anchor: Optional[int] = None  # provenance of the anchor 1, when known


@dataclass(frozen=True)
class Metrics:
    edit_distance: int
    normalized_de: float
    coverage: float
    chunks: int
    overlapping_chunks: Optional[int] = None


@dataclass(frozen=True)
class ReconstructionReport:
    x_hat: BitString
    chunks: tuple[ChunkInfo, ...]
    n_estimate: int
    K2: Optional[int]
    params: PipelineParams
    fallback: bool = False
    metrics: Optional[Metrics] = None

    @property
    def coverage(self) -> float:
        return len(self.x_hat) / self.n_estimate if self.n_estimate else 0.0


def _source_anchor(records: Optional[Sequence[TraceRecord]], flags) -> Optional[int]:
    if records is None:
        return None
    votes = Counter(int(records[t].origin[f.hit.one_position]) for t, f in enumerate(flags, start=1) if f.good)
    return votes.most_common(1)[0][0] if votes else None


def _scan(
    arrays: list[np.ndarray],
    params: PipelineParams,
    schedule: AlignSchedule,
    anchors: AnchorParams,
    records: Optional[Sequence[TraceRecord]],
    truth: Optional[np.ndarray],
    reverse: bool,
) -> list[tuple[ChunkInfo, np.ndarray]]:
    first = arrays[0]
    K2 = schedule.K2
    k = params.chunk_length(K2)
    spacing = params.chunk_spacing(K2)
    lo_frac, hi_frac = params.scan_fractions
    j_lo = max(math.ceil(lo_frac * first.size), 2 * schedule.levels[0])
    j_hi = min(math.floor(hi_frac * first.size), first.size - K2)
    aligner = Aligner(arrays, schedule, params.test, params.search_radius, params.match_rule)
    out = []
    j = j_lo
    while j <= j_hi:
        outcome = aligner.align(j)
        useful, flags = is_trace_useful(outcome, arrays, anchors, len(arrays))
        if not useful:
            j += 1
            continue
        suffixes = [
            BitString._wrap(arrays[t][f.hit.one_position + 1 :].copy())
            for t, f in enumerate(flags, start=1)
            if f.good
        ]
        src = _source_anchor(records, flags)
        kk = min(k, math.floor(params.p * min(len(s) for s in suffixes)))
        if len(suffixes) < 2 or kk < 1:
            j += 1
            continue
        task_truth = None
        if truth is not None and src is not None:
            task_truth = BitString._wrap(truth[src + 1 :].copy())
        task = PrefixTask(suffixes, kk, params.p, task_truth)
        result = reconstruct_prefix(task, params.strategy)
        info = ChunkInfo(j, kk, params.strategy, tuple(f.good for f in flags), 0, reverse, src)
        out.append((info, as_array(result.bits)))
        j += spacing + 1
    return out


def _fallback(arrays, params: PipelineParams, n_est: int, truth) -> ReconstructionReport:
    # tiny inputs: run the prefix strategy on the whole traces
    suffixes = [BitString._wrap(a.copy()) for a in arrays]
    task = PrefixTask(suffixes, n_est, params.p, None if truth is None else BitString(truth))
    result = get_strategy(params.strategy)(task)
    info = ChunkInfo(0, n_est, params.strategy, (), 0)
    return ReconstructionReport(result.bits, (info,), n_est, None, params, fallback=True)


def reconstruct(
    traces: Sequence,
    params: PipelineParams,
    truth=None,
    records: Optional[Sequence[TraceRecord]] = None,
) -> ReconstructionReport:
    """Approximate reconstruction.

    ``truth`` and ``records`` are optional simulation inputs: ``truth`` feeds the
    oracle strategy and fills the report's metrics, ``records`` lets chunks carry
    the provenance of their anchor.
    """
    arrays = [as_array(u) for u in traces]
    if len(arrays) < 2:
        raise ValueError(f"need at least 2 traces, got {len(arrays)}")
    if any(a.size == 0 for a in arrays):
        raise ValueError("traces must be non-empty")
    truth_arr = None if truth is None else as_array(truth)
    n_est = max(1, round(float(np.mean([a.size for a in arrays])) / params.p))
    if n_est < params.min_n_guard:
        report = _fallback(arrays, params, n_est, truth_arr)
    else:
        n_sched = round(arrays[0].size / params.p)
        schedule = params.schedule(n_sched)
        K2 = schedule.K2
        if arrays[0].size < 2 * schedule.levels[0] + 2 * K2:
            raise ValueError(f"trace 1 (length {arrays[0].size}) is shorter than the minimal scan window")
        anchors = params.anchors(K2)
        pieces = _scan(arrays, params, schedule, anchors, records, truth_arr, reverse=False)
        if params.full_string:
            rev = [a[::-1].copy() for a in arrays]
            rrec = None
            if records is not None and truth_arr is not None:
                n = truth_arr.size
                rrec = [
                    TraceRecord(BitString._wrap(a), r.retention_mask[::-1], (n - 1 - r.origin[::-1]))
                    for a, r in zip(rev, records)
                ]
            rtruth = None if truth_arr is None else truth_arr[::-1].copy()
            back = _scan(rev, params, schedule, anchors, rrec, rtruth, reverse=True)
            # mirrored chunks, right end of x last
            pieces += [(info, bits[::-1]) for info, bits in reversed(back)]
        chunks, parts, offset = [], [], 0
        for info, bits in pieces:
            src = info.source_anchor
            if info.reverse and src is not None and truth_arr is not None:
                src = truth_arr.size - 1 - src
            chunks.append(replace(info, offset=offset, source_anchor=src))
            parts.append(bits)
            offset += bits.size
        x_hat = BitString._wrap(np.concatenate(parts) if parts else np.zeros(0, np.uint8))
        report = ReconstructionReport(x_hat, tuple(chunks), n_est, K2, params)
    if truth_arr is not None:
        report = replace(report, metrics=evaluate(truth_arr, report))
    return report


def _overlaps(report: ReconstructionReport) -> Optional[int]:
    spans = [
        (c.source_anchor + 1, c.source_anchor + 1 + c.length) if not c.reverse
        else (c.source_anchor - c.length, c.source_anchor)
        for c in report.chunks
        if c.source_anchor is not None
    ]
    if not spans or report.fallback:
        return None
    spans.sort()
    return sum(b[0] < a[1] for a, b in zip(spans, spans[1:]))


def evaluate(x, report: ReconstructionReport, band: Optional[int] = None) -> Metrics:
    """Edit distance between ``x`` and the report's output, normalised by ``|x|``.

    With ``band`` given, the banded computation is tried first and the exact
    bit-parallel one is used only if the distance exceeds the band.  By
    default the bit-parallel computation runs directly; it is exact and, for
    long strings, faster than any useful band.
    """
    xa, ya = as_array(x), as_array(report.x_hat)
    n = xa.size
    d = None
    if band is not None and band >= abs(n - ya.size):
        d = edit_distance_banded(xa, ya, band)
    if d is None:
        d = edit_distance(xa, ya)
    return Metrics(
        edit_distance=d,
        normalized_de=d / n if n else 0.0,
        coverage=ya.size / n if n else 0.0,
        chunks=len(report.chunks),
        overlapping_chunks=_overlaps(report),
    )


def prune_overlaps(
    report: ReconstructionReport, records: Optional[Sequence[TraceRecord]]
) -> tuple[ReconstructionReport, int]:
    """Drop each chunk whose trace-1 index maps within ``K2**C10 + K2**(C10/10)`` of the previous one's.

    Returns the pruned report and the number of chunks dropped.  Metrics are
    not recomputed.
    """
    if not records:
        raise ValueError("prune_overlaps needs the trace records (simulation mode)")
    if report.K2 is None or not report.chunks:
        return report, 0
    origin = records[0].origin
    C10 = report.params.C10
    gap = report.K2**C10 + report.K2 ** (C10 / 10)
    bits = as_array(report.x_hat)
    kept, parts, dropped, prev = [], [], 0, None
    offset = 0
    for c in report.chunks:
        if c.reverse:
            # mirrored chunk: it ends at its anchor, so compare its left end
            g = int(origin[origin.size - 1 - c.j]) - c.length
        else:
            g = int(origin[c.j])
        if prev is not None and g <= prev + gap:
            dropped += 1
        else:
            kept.append(replace(c, offset=offset))
            parts.append(bits[c.offset : c.offset + c.length])
            offset += c.length
        prev = g
    x_hat = BitString._wrap(np.concatenate(parts) if parts else np.zeros(0, np.uint8))
    return replace(report, x_hat=x_hat, chunks=tuple(kept), metrics=None), dropped
