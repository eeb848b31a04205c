import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracerecon.bitcore import BitString, RngHandle, sample_uniform
from tracerecon.blocktest import (
    TestParams,
    block_majorities,
    block_schedule,
    min_agreements,
    sliding_majority,
    test_match,
)


def test_block_schedule_examples():
    assert block_schedule(4096, 0.5) == (64, 64)
    assert block_schedule(4096, 0.495) == (61, 67)
    assert math.floor(4096**0.495) == 61
    with pytest.raises(ValueError):
        block_schedule(3, 0.495)


def test_threshold():
    # strictly more than (1/2 + kappa0) of the blocks
    assert min_agreements(61, 0.16) == 41
    assert min_agreements(10, 0.2) == 8


def test_identical_windows_match():
    params = TestParams()
    for m in (16, 100, 4096):
        u = sample_uniform(m, RngHandle(m))
        v = test_match(u, u, params)
        assert v.matched and v.agree_count == v.block_count


def test_complement_never_agrees():
    u = sample_uniform(4096, RngHandle(3))
    v = test_match(u, u.complement(), TestParams())
    assert block_schedule(4096, 0.495)[1] % 2 == 1
    assert not v.matched and v.agree_count == 0


def test_independent_windows_rarely_match():
    params = TestParams()
    gen = RngHandle(11).generator
    hits = 0
    trials = 10_000
    for _ in range(trials):
        u = gen.integers(0, 2, 4096, dtype=np.uint8)
        v = gen.integers(0, 2, 4096, dtype=np.uint8)
        hits += test_match(u, v, params).matched
    assert hits / trials <= 0.01


def test_length_mismatch():
    with pytest.raises(ValueError):
        test_match(BitString("0" * 20), BitString("0" * 21), TestParams())


@pytest.mark.parametrize(
    "kw, field",
    [
        ({"alpha": 0.45}, "alpha"),
        ({"alpha": 0.5}, "alpha"),
        ({"kappa0": 0.5}, "kappa0"),
        ({"kappa0": 0.0}, "kappa0"),
        ({"beta": 0.3}, "beta"),
        ({"lam": 0.5}, "lam"),
        ({"lam": 0.6}, "lam"),
    ],
)
def test_param_ranges(kw, field):
    with pytest.raises(ValueError, match=field):
        TestParams(**kw)


def test_desk_override_widens_ranges():
    p = TestParams(alpha=0.45, beta=0.4, lam=0.7, desk_override=True)
    assert p.alpha == 0.45
    with pytest.raises(ValueError):
        TestParams(alpha=0.2, desk_override=True)


@given(st.text(alphabet="01", min_size=1, max_size=200), st.integers(1, 30))
def test_sliding_majority_matches_blocks(s, length):
    w = BitString(s)
    sm = sliding_majority(w, length)
    assert sm.size == max(0, len(s) - length + 1)
    for start in range(0, sm.size, 7):
        assert sm[start] == block_majorities(w[start : start + length], 1, length)[0]


@settings(max_examples=100, deadline=None)
@given(st.integers(16, 600), st.integers(0, 2**32), st.floats(0.0, 0.5))
def test_symmetric(m, seed, flip):
    gen = np.random.default_rng(seed)
    u = gen.integers(0, 2, m, dtype=np.uint8)
    v = u ^ (gen.random(m) < flip).astype(np.uint8)
    a, b = test_match(u, v, TestParams()), test_match(v, u, TestParams())
    assert (a.matched, a.agree_count) == (b.matched, b.agree_count)
    assert a.agree_count == int(a.sigma.sum())
