"""Bit strings and seeded random streams.

Bits are held one per byte in a read-only ``numpy.uint8`` array.  Popcounts
over windows go through cumulative sums, which is what every scanner in the
package needs anyway.

Randomness comes from numpy's PCG64 bit generator fed through a
``SeedSequence``.  Both are specified independently of the platform, so a
given ``(seed, stream, key)`` reproduces the same bits everywhere.  Streams are
separated by putting the stream id into the spawn key: the source string draws
from ``Stream.SOURCE``, the deletion channel from ``Stream.RETENTION`` and the
experiment harness (index choices, code construction) from ``Stream.HARNESS``.
"""
from __future__ import annotations

import enum
from typing import Iterable, Iterator, Union

import numpy as np

__all__ = [
    "BitString",
    "Stream",
    "RngHandle",
    "as_array",
    "sample_uniform",
    "maj",
]


class BitString:
    """Immutable sequence of bits.

    ``x[a:b]`` is the half-open substring ``x_a .. x_{b-1}``; integer indexing
    returns a plain ``int``.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits: Union["BitString", str, Iterable[int], np.ndarray] = ()):
        if isinstance(bits, BitString):
            arr = bits._bits
        elif isinstance(bits, str):
            if bits.strip("01"):
                raise ValueError(f"not a 0/1 string: {bits!r}")
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits))
            if arr.size and (arr.min() < 0 or arr.max() > 1):
                raise ValueError("bits must be 0 or 1")
            arr = arr.astype(np.uint8, copy=True)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.flags.writeable:
            arr = arr.copy()
            arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "BitString":
        # trusted constructor: arr is a fresh uint8 0/1 array
        obj = cls.__new__(cls)
        arr.flags.writeable = False
        obj._bits = arr
        return obj

    @property
    def bits(self) -> np.ndarray:
        """Read-only uint8 view of the bits."""
        return self._bits

    @property
    def length(self) -> int:
        return int(self._bits.size)

    def __len__(self) -> int:
        return int(self._bits.size)

    def __getitem__(self, key):
        if isinstance(key, slice):
            return BitString._wrap(self._bits[key].copy())
        return int(self._bits[key])

    def __iter__(self) -> Iterator[int]:
        return iter(self._bits.tolist())

    def __eq__(self, other) -> bool:
        if isinstance(other, str):
            other = BitString(other)
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __add__(self, other: "BitString") -> "BitString":
        return BitString._wrap(np.concatenate([self._bits, as_array(other)]))

    def __str__(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 40:
            s = s[:37] + "..."
        return f"BitString('{s}', length={len(self)})"

    def ones(self) -> int:
        return int(np.count_nonzero(self._bits))

    def complement(self) -> "BitString":
        return BitString._wrap(1 - self._bits)

    def reversed(self) -> "BitString":
        return BitString._wrap(self._bits[::-1].copy())

    def to_int(self) -> int:
        """Integer whose binary expansion (most significant first) is the string."""
        return int(str(self), 2) if len(self) else 0

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        return cls(format(value, f"0{length}b") if length else "")

    @classmethod
    def concat(cls, parts: Iterable["BitString"]) -> "BitString":
        arrays = [as_array(p) for p in parts]
        if not arrays:
            return cls()
        return cls._wrap(np.concatenate(arrays))


def as_array(x) -> np.ndarray:
    """uint8 0/1 array for a BitString, string or array-like."""
    if isinstance(x, BitString):
        return x.bits
    if isinstance(x, np.ndarray) and x.dtype == np.uint8:
        return x
    return BitString(x).bits


class Stream(enum.IntEnum):
    SOURCE = 0
    RETENTION = 1
    HARNESS = 2


class RngHandle:
    """Deterministic random stream identified by ``(seed, stream, key)``.

    ``key`` is a tuple of non-negative integers that names a sub-stream, e.g.
    ``(trial, trace)``.  Handles are cheap; derive one per worker or per trial
    with :meth:`child` instead of sharing a single handle.
    """

    def __init__(self, seed: int, stream: Stream = Stream.SOURCE, key: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.stream = Stream(stream)
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(self.stream),) + self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, *key: int) -> "RngHandle":
        return RngHandle(self.seed, self.stream, self.key + tuple(key))

    def with_stream(self, stream: Stream) -> "RngHandle":
        return RngHandle(self.seed, stream, self.key)

    def __repr__(self) -> str:
        return f"RngHandle(seed={self.seed}, stream={self.stream.name}, key={self.key})"


def sample_uniform(n: int, rng: RngHandle) -> BitString:
    """``n`` independent fair bits."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return BitString._wrap(rng.generator.integers(0, 2, size=n, dtype=np.uint8))


def maj(w) -> int:
    """1 if ``w`` has strictly more ones than zeros, else 0 (ties give 0)."""
    arr = as_array(w)
    return int(2 * int(np.count_nonzero(arr)) > arr.size)
