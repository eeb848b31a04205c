import numpy as np
import pytest
from hypothesis import given, strategies as st

from tracerecon.bitcore import BitString, RngHandle, Stream, as_array, maj, sample_uniform

bitstrings = st.text(alphabet="01", max_size=80)


def test_sample_uniform_empty():
    assert len(sample_uniform(0, RngHandle(3))) == 0


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_sample_uniform_balanced(seed):
    x = sample_uniform(10_000, RngHandle(seed))
    assert abs(x.ones() / 10_000 - 0.5) <= 0.02


def test_sample_uniform_deterministic():
    a = sample_uniform(500, RngHandle(42, Stream.SOURCE, (3,)))
    b = sample_uniform(500, RngHandle(42, Stream.SOURCE, (3,)))
    assert a == b


def test_streams_and_keys_differ():
    base = sample_uniform(256, RngHandle(9))
    assert base != sample_uniform(256, RngHandle(9, Stream.RETENTION))
    assert base != sample_uniform(256, RngHandle(9).child(1))
    assert RngHandle(9).child(1, 2).key == (1, 2)
    assert RngHandle(9, Stream.HARNESS).with_stream(Stream.SOURCE).stream is Stream.SOURCE


def test_sample_uniform_rejects_negative():
    with pytest.raises(ValueError):
        sample_uniform(-1, RngHandle(0))


def test_bad_seed():
    with pytest.raises(ValueError):
        RngHandle(-1)
    with pytest.raises(ValueError):
        RngHandle(2**64)


@pytest.mark.parametrize("w, expected", [("110", 1), ("10", 0), ("", 0), ("1", 1), ("0011", 0), ("10101", 1)])
def test_maj(w, expected):
    assert maj(BitString(w)) == expected


def test_bitstring_rejects_non_bits():
    with pytest.raises(ValueError):
        BitString("012")
    with pytest.raises(ValueError):
        BitString([0, 2])


@given(bitstrings)
def test_int_roundtrip(s):
    b = BitString(s)
    assert BitString.from_int(b.to_int(), len(b)) == b
    assert str(b) == s


@given(bitstrings, bitstrings)
def test_concat_and_slices(s, t):
    a, b = BitString(s), BitString(t)
    c = BitString.concat([a, b])
    assert str(c) == s + t
    assert c == a + b
    assert c[: len(s)] == a
    assert len(c) == len(s) + len(t)


@given(bitstrings)
def test_complement_reverse(s):
    b = BitString(s)
    assert str(b.complement()) == s.translate(str.maketrans("01", "10"))
    assert str(b.reversed()) == s[::-1]
    assert b.ones() == s.count("1")
    assert hash(b) == hash(BitString(s))


def test_bits_are_read_only():
    b = BitString("0101")
    with pytest.raises(ValueError):
        b.bits[0] = 1
    assert as_array("0101").dtype == np.uint8
