"""Block-majority match test for two equal-length windows.

Both windows are cut into ``floor(m**alpha)`` contiguous, left-aligned blocks
of ``floor(m / count)`` bits; leftover bits at the right end are ignored.
The windows match when strictly more than ``(1/2 + kappa0) * count`` blocks
have the same majority bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitcore import as_array

__all__ = [
    "TestParams",
    "TestVerdict",
    "block_schedule",
    "block_majorities",
    "min_agreements",
    "sliding_majority",
    "test_match",
]

DEFAULT_ALPHA = 0.495
DEFAULT_KAPPA0 = 0.16
DEFAULT_BETA = 0.2
DEFAULT_LAMBDA = 0.5025


@dataclass(frozen=True)
class TestParams:
    """Constants of the match test plus the two conditioning exponents.

    ``beta`` and ``lam`` do not enter the test itself; they set the offset
    scales used by the alignment success criterion and the lemma estimators.
    ``desk_override`` widens the admissible ranges for small-scale runs and is
    reported in every output that uses it.
    """

    __test__ = False  # not a pytest class

    alpha: float = DEFAULT_ALPHA
    kappa0: float = DEFAULT_KAPPA0
    beta: float = DEFAULT_BETA
    lam: float = DEFAULT_LAMBDA
    desk_override: bool = False

    def __post_init__(self):
        lo = 0.3 if self.desk_override else 0.49
        if not lo < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in ({lo}, 0.5), got {self.alpha}")
        if not 0.0 < self.kappa0 < 0.5:
            raise ValueError(f"kappa0 must lie in (0, 0.5), got {self.kappa0}")
        if not self.desk_override:
            if not 0.0 < self.beta < (1 - self.alpha) / 2:
                raise ValueError(f"beta must lie in (0, {(1 - self.alpha) / 2:.4f}), got {self.beta}")
            if not 0.5 < self.lam < 1 - self.alpha:
                raise ValueError(f"lam must lie in (0.5, {1 - self.alpha:.4f}), got {self.lam}")
        elif not (0.0 < self.beta < 1.0 and 0.0 < self.lam < 1.0):
            raise ValueError("beta and lam must lie in (0, 1)")


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False

    matched: bool
    agree_count: int
    block_count: int
    sigma: np.ndarray


def block_schedule(m: int, alpha: float) -> tuple[int, int]:
    """``(block_count, block_length)`` for windows of length ``m``."""
    count = math.floor(m**alpha + 1e-9) if m > 0 else 0
    if count < 2:
        raise ValueError(f"window length {m} gives fewer than 2 blocks at alpha={alpha}")
    return count, m // count


def min_agreements(block_count: int, kappa0: float) -> int:
    """Smallest agreement count that declares a match."""
    return math.floor((0.5 + kappa0) * block_count) + 1


def block_majorities(w, count: int, length: int) -> np.ndarray:
    bits = as_array(w)[: count * length].reshape(count, length)
    return (2 * bits.sum(axis=1, dtype=np.int64) > length).astype(np.uint8)


def sliding_majority(w, length: int) -> np.ndarray:
    """``out[s] = Maj(w[s:s+length])`` for every start ``s``."""
    bits = as_array(w)
    if bits.size < length:
        return np.zeros(0, dtype=np.uint8)
    cs = np.concatenate(([0], np.cumsum(bits, dtype=np.int64)))
    return (2 * (cs[length:] - cs[:-length]) > length).astype(np.uint8)


def test_match(u, v, params: TestParams) -> TestVerdict:
    a, b = as_array(u), as_array(v)
    if a.size != b.size:
        raise ValueError(f"windows differ in length ({a.size} vs {b.size})")
    count, length = block_schedule(a.size, params.alpha)
    sigma = (block_majorities(a, count, length) == block_majorities(b, count, length)).astype(np.uint8)
    agree = int(sigma.sum())
    return TestVerdict(agree >= min_agreements(count, params.kappa0), agree, count, sigma)


# not a pytest test, despite the name
test_match.__test__ = False
