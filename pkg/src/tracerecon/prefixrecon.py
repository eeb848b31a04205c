"""Reconstruct the first ``k`` bits of a source suffix from aligned trace suffixes.

Strategies are registered by name.  Three ship with the package:

``bma``
    Bitwise majority alignment with per-trace cursors.  Cursors reading the
    majority bit advance; a disagreeing cursor stays put until it has disagreed
    ``ceil(1/p)`` times in a row, then advances once.
``bma-runs`` (default)
    Majority alignment over runs.  The majority decides the next run's symbol;
    the run length is the maximum-likelihood ``L`` given the run lengths seen by
    the agreeing traces, each modelled as ``Binomial(L, p)`` conditioned on
    being at least 1.  Agreeing cursors then skip their run.
``oracle``
    Reads the true source from the task (simulation only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binom

from .bitcore import BitString, as_array

__all__ = [
    "PrefixTask",
    "PrefixResult",
    "register_strategy",
    "get_strategy",
    "available_strategies",
    "reconstruct_prefix",
    "DEFAULT_STRATEGY",
]

DEFAULT_STRATEGY = "bma-runs"


@dataclass(frozen=True)
class PrefixTask:
    suffixes: Sequence[BitString]
    k: int
    p: float
    truth: Optional[BitString] = None  # only read by the oracle strategy


@dataclass(frozen=True)
class PrefixResult:
    bits: BitString
    confidence: np.ndarray


Strategy = Callable[[PrefixTask], PrefixResult]
_REGISTRY: dict[str, Strategy] = {}


def register_strategy(name: str, strategy: Strategy) -> None:
    if name in _REGISTRY:
        raise ValueError(f"strategy {name!r} is already registered")
    _REGISTRY[name] = strategy


def get_strategy(name: str) -> Strategy:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; available: {available_strategies()}") from None


def available_strategies() -> list[str]:
    return sorted(_REGISTRY)


def check_task(task: PrefixTask) -> None:
    if len(task.suffixes) < 2:
        raise ValueError(f"need at least 2 suffixes, got {len(task.suffixes)}")
    if task.k < 0:
        raise ValueError("k must be non-negative")
    shortest = min(len(s) for s in task.suffixes)
    if task.k > task.p * shortest:
        raise ValueError(f"k={task.k} exceeds p * shortest suffix = {task.p * shortest:.1f}")


def reconstruct_prefix(task: PrefixTask, strategy: str = DEFAULT_STRATEGY) -> PrefixResult:
    check_task(task)
    result = get_strategy(strategy)(task)
    assert len(result.bits) == task.k
    return result


def _finish(out: list[int], conf: list[float], k: int) -> PrefixResult:
    # cursors ran dry: pad with zeros at zero confidence
    out = out[:k] + [0] * max(0, k - len(out))
    conf = conf[:k] + [0.0] * max(0, k - len(conf))
    return PrefixResult(BitString(np.array(out, dtype=np.uint8)), np.array(conf))


def bma(task: PrefixTask) -> PrefixResult:
    arrays = [as_array(s) for s in task.suffixes]
    cur = np.zeros(len(arrays), dtype=np.int64)
    misses = np.zeros(len(arrays), dtype=np.int64)
    patience = math.ceil(1 / task.p)
    lengths = np.array([a.size for a in arrays])
    out, conf = [], []
    while len(out) < task.k:
        live = np.flatnonzero(cur < lengths)
        if live.size == 0:
            break
        under = np.array([arrays[t][cur[t]] for t in live])
        ones = int(under.sum())
        bit = int(2 * ones > live.size)
        out.append(bit)
        conf.append(abs(2 * ones - live.size) / live.size)
        agree = under == bit
        cur[live[agree]] += 1
        misses[live[agree]] = 0
        lag = live[~agree]
        misses[lag] += 1
        jump = lag[misses[lag] >= patience]
        cur[jump] += 1
        misses[jump] = 0
    return _finish(out, conf, task.k)


def _run_length(a: np.ndarray, start: int) -> int:
    bit = a[start]
    span = 16
    while True:
        change = np.flatnonzero(a[start : start + span] != bit)
        if change.size:
            return int(change[0])
        if start + span >= a.size:
            return a.size - start
        span *= 4


def _mle_run(observed: np.ndarray, p: float, floor: float = 0.03) -> int:
    top = int(math.ceil((observed.max() + 2) / p)) + 2
    L = np.arange(1, top + 1)
    pmf = binom.pmf(observed[None, :], L[:, None], p) / (1 - (1 - p) ** L)[:, None]
    loglik = np.log(np.maximum(pmf, floor)).sum(axis=1)
    return int(L[np.argmax(loglik)])


def bma_runs(task: PrefixTask) -> PrefixResult:
    arrays = [as_array(s) for s in task.suffixes]
    cur = np.zeros(len(arrays), dtype=np.int64)
    lengths = np.array([a.size for a in arrays])
    out, conf = [], []
    while len(out) < task.k:
        live = np.flatnonzero(cur < lengths)
        if live.size == 0:
            break
        under = np.array([arrays[t][cur[t]] for t in live])
        ones = int(under.sum())
        bit = int(2 * ones > live.size)
        margin = abs(2 * ones - live.size) / live.size
        sync = live[under == bit]
        runs = np.array([_run_length(arrays[t], cur[t]) for t in sync])
        L = _mle_run(runs, task.p)
        out.extend([bit] * L)
        conf.extend([margin] * L)
        cur[sync] += np.minimum(runs, L)
    return _finish(out, conf, task.k)


def oracle(task: PrefixTask) -> PrefixResult:
    if task.truth is None:
        raise ValueError("the oracle strategy needs task.truth")
    bits = as_array(task.truth)[: task.k]
    return _finish(bits.tolist(), [1.0] * bits.size, task.k)


register_strategy("bma", bma)
register_strategy("bma-runs", bma_runs)
register_strategy("oracle", oracle)
