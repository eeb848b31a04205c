"""The deletion channel, with the retention mask and provenance kept for analysis.

Provenance follows the 1-based convention ``g(j) = l  iff  r_1 + ... + r_l = j``.
Everything else in the package is 0-based; :attr:`TraceRecord.origin` carries
the same map in 0-based form and is what analysis code should use.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bitcore import BitString, RngHandle, as_array

__all__ = ["ChannelParams", "TraceRecord", "transmit", "transmit_with_mask", "transmit_many", "bare_traces"]


@dataclass(frozen=True)
class ChannelParams:
    q: float

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")

    @property
    def p(self) -> float:
        return 1.0 - self.q


@dataclass(frozen=True, eq=False)
class TraceRecord:
    trace: BitString
    retention_mask: np.ndarray
    origin: np.ndarray  # origin[k] = 0-based source index of trace bit k

    def __len__(self) -> int:
        return len(self.trace)

    def g(self, j: int) -> int:
        """1-based provenance: the source index sent to trace index ``j``."""
        if not 1 <= j <= len(self.trace):
            raise IndexError(f"trace index {j} outside 1..{len(self.trace)}")
        return int(self.origin[j - 1]) + 1

    @property
    def provenance(self) -> dict[int, int]:
        return {k + 1: int(v) + 1 for k, v in enumerate(self.origin)}


def transmit_with_mask(x, mask) -> TraceRecord:
    """Replay the channel with a given retention mask (1 = bit kept)."""
    bits = as_array(x)
    m = np.asarray(as_array(mask) if isinstance(mask, (str, BitString)) else mask)
    if m.shape != bits.shape:
        raise ValueError(f"mask length {m.size} does not match source length {bits.size}")
    m = m.astype(bool)
    origin = np.flatnonzero(m)
    origin.flags.writeable = False
    keep = m.astype(np.uint8)
    keep.flags.writeable = False
    return TraceRecord(BitString._wrap(bits[origin]), keep, origin)


def transmit(x, params: ChannelParams, rng: RngHandle) -> TraceRecord:
    """Delete each bit of ``x`` independently with probability ``params.q``."""
    n = len(as_array(x))
    mask = rng.generator.random(n) < params.p
    return transmit_with_mask(x, mask)


def transmit_many(x, params: ChannelParams, rng: RngHandle, count: int) -> list[TraceRecord]:
    """``count`` independent traces; trace ``t`` uses sub-stream ``rng.child(t)``."""
    return [transmit(x, params, rng.child(t)) for t in range(count)]


def bare_traces(records: Sequence[TraceRecord]) -> list[BitString]:
    return [r.trace for r in records]
