import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracerecon.alignment import Aligner, align, build_schedule, is_on_track, provenance_offsets
from tracerecon.bitcore import RngHandle, sample_uniform
from tracerecon.blocktest import TestParams
from tracerecon.channel import ChannelParams, bare_traces, transmit_many, transmit_with_mask


def test_schedule_examples():
    s = build_schedule(65536, 16)
    assert (s.levels, s.R, s.K2) == ((256, 16), 2, 16)
    s = build_schedule(2**32, 10)
    assert (s.levels, s.R, s.K2) == ((65536, 256, 16, 4), 4, 4)
    s = build_schedule(100, 10)
    assert (s.levels, s.R, s.K2) == ((10,), 1, 10)


def test_schedule_errors():
    with pytest.raises(ValueError):
        build_schedule(100, 3)
    with pytest.raises(ValueError):
        build_schedule(100, 101)


def _identical(n=4096, T=4, seed=0):
    x = sample_uniform(n, RngHandle(seed))
    recs = [transmit_with_mask(x, np.ones(n, dtype=np.uint8)) for _ in range(T)]
    return x, recs


def test_identical_traces_windows_agree():
    x, recs = _identical()
    sched = build_schedule(4096, 16)
    aligner = Aligner(bare_traces(recs), sched, TestParams())
    traces = aligner.traces
    for j in (200, 1000, 3000):
        out = aligner.align(j)
        assert out.found == 3
        segs = {traces[t][a:b].tobytes() for t, (a, b) in enumerate(out.windows, start=1)}
        assert len(segs) == 1
        assert all(b - a == 2 * sched.K2 for a, b in out.windows)


def test_single_trace_gives_no_windows():
    x, recs = _identical(T=1)
    out = align(bare_traces(recs), 500, build_schedule(4096, 16), TestParams())
    assert out.windows == ()
    assert out.anchor_window_1 == (500 - 8, 500 + 8)


def test_index_bounds():
    x, recs = _identical()
    aligner = Aligner(bare_traces(recs), build_schedule(4096, 16), TestParams())
    with pytest.raises(ValueError):
        aligner.align(10)
    with pytest.raises(ValueError):
        aligner.align(4096)


def test_unknown_rule():
    x, recs = _identical()
    with pytest.raises(ValueError):
        Aligner(bare_traces(recs), build_schedule(4096, 16), TestParams(), rule="nearest")


def test_identity_channel_on_track_with_exact_search():
    x, recs = _identical(seed=4)
    aligner = Aligner(bare_traces(recs), build_schedule(4096, 16), TestParams(), search_radius=0, rule="best")
    for j in range(128, 4000, 97):
        out = aligner.align(j)
        assert is_on_track(out, recs, 0.2)
        assert all(np.all(d == 0) for d in provenance_offsets(out, recs))


@pytest.fixture(scope="module")
def noisy():
    x = sample_uniform(8192, RngHandle(21))
    recs = transmit_many(x, ChannelParams(0.2), RngHandle(21, key=(1,)), 5)
    return x, recs


@settings(max_examples=40, deadline=None)
@given(j=st.integers(0, 10**6), radius=st.sampled_from([None, 40, 300]))
def test_batched_equals_per_trace(noisy, j, radius):
    x, recs = noisy
    aligner = Aligner(bare_traces(recs), build_schedule(8192, 16), TestParams(), search_radius=radius)
    lo, hi = 2 * aligner.schedule.levels[0], len(recs[0]) - aligner.schedule.K2
    jj = lo + j % (hi - lo)
    a, b = aligner.align(jj), aligner.align_each(jj)
    assert a.windows == b.windows
    assert a.intervals == b.intervals


def test_windows_inside_traces(noisy):
    x, recs = noisy
    aligner = Aligner(bare_traces(recs), build_schedule(8192, 16), TestParams(), rule="best", search_radius=200)
    for j in range(300, 6000, 311):
        out = aligner.align(j)
        for t, w in enumerate(out.windows, start=2):
            if w is not None:
                assert 0 <= w[0] < w[1] <= len(recs[t - 1])
