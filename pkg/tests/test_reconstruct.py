import math

import numpy as np
import pytest

from tracerecon.bitcore import BitString, RngHandle, sample_uniform
from tracerecon.channel import ChannelParams, bare_traces, transmit_many, transmit_with_mask
from tracerecon.editdist import edit_distance, lcs_length
from tracerecon.reconstruct import (
    ChunkInfo,
    PipelineParams,
    ReconstructionReport,
    evaluate,
    prune_overlaps,
    reconstruct,
)


@pytest.fixture(scope="module")
def identity_run():
    n = 1 << 14
    x = sample_uniform(n, RngHandle(3))
    recs = [transmit_with_mask(x, np.ones(n, dtype=np.uint8)) for _ in range(4)]
    params = PipelineParams(ChannelParams(0.2), T=4)
    return x, recs, reconstruct(bare_traces(recs), params, truth=x, records=recs)


def test_identity_channel_gives_subsequence(identity_run):
    x, recs, report = identity_run
    assert len(report.chunks) > 0
    assert lcs_length(report.x_hat, x) == len(report.x_hat)
    m = report.metrics
    assert m.normalized_de <= 1 - m.coverage + 1e-9


def test_needs_two_traces():
    x = sample_uniform(4096, RngHandle(1))
    with pytest.raises(ValueError):
        reconstruct([x], PipelineParams(ChannelParams(0.2)))
    with pytest.raises(ValueError):
        PipelineParams(ChannelParams(0.2), T=1)


def test_small_inputs_fall_back():
    x = sample_uniform(200, RngHandle(1))
    recs = transmit_many(x, ChannelParams(0.1), RngHandle(1, key=(1,)), 16)
    report = reconstruct(bare_traces(recs), PipelineParams(ChannelParams(0.1), T=16), truth=x)
    assert report.fallback
    assert report.metrics.normalized_de < 0.1


def test_reconstruct_is_deterministic():
    x = sample_uniform(1 << 13, RngHandle(8))
    recs = transmit_many(x, ChannelParams(0.2), RngHandle(8, key=(1,)), 4)
    params = PipelineParams(ChannelParams(0.2), T=4)
    a = reconstruct(bare_traces(recs), params)
    b = reconstruct(bare_traces(recs), params)
    assert a.x_hat == b.x_hat and a.chunks == b.chunks
    assert a.metrics is None


def test_full_string_adds_reverse_chunks():
    x = sample_uniform(1 << 13, RngHandle(9))
    recs = transmit_many(x, ChannelParams(0.2), RngHandle(9, key=(1,)), 4)
    params = PipelineParams(ChannelParams(0.2), T=4, full_string=True)
    report = reconstruct(bare_traces(recs), params, truth=x, records=recs)
    assert any(c.reverse for c in report.chunks)
    assert sum(c.length for c in report.chunks) == len(report.x_hat)


def test_param_derivations():
    params = PipelineParams(ChannelParams(0.5))
    assert params.chunk_length(16) == 64
    assert params.chunk_spacing(16) == math.ceil(0.5 * 64 + 0.5 * 64**0.75)
    assert params.scan_fractions == pytest.approx((0.01, 0.49))
    assert params.schedule(65536).K2 == 16
    assert params.anchors(16).lengths.trace_anchor_len == 7
    assert PipelineParams(ChannelParams(0.5), desk_anchors=False).anchors(64).overrides == {}
    d = params.describe()
    assert d["q"] == 0.5 and d["T"] == 8


@pytest.mark.parametrize(
    "kw",
    [{"K1": 3}, {"C10": 0}, {"eps": 0.8}, {"j_range": (0.5, 0.2)}, {"chunk_len": 0}, {"strategy": "nope"}],
)
def test_param_validation(kw):
    with pytest.raises((ValueError, KeyError)):
        PipelineParams(ChannelParams(0.5), **kw)


def _report(x_hat, chunks=(), K2=16):
    return ReconstructionReport(BitString(x_hat), tuple(chunks), 100, K2, PipelineParams(ChannelParams(0.5)))


def test_evaluate_examples():
    x = sample_uniform(300, RngHandle(2))
    assert evaluate(x, _report(x)).edit_distance == 0
    empty = evaluate(x, _report(""))
    assert empty.edit_distance == 300 and empty.normalized_de == 1.0
    y = sample_uniform(217, RngHandle(3))
    m = evaluate(x, _report(y))
    assert m.edit_distance % 2 == (300 + 217) % 2
    assert m.edit_distance == edit_distance(x, y)
    assert evaluate(x, _report(y), band=400).edit_distance == m.edit_distance
    assert evaluate(x, _report(y), band=90).edit_distance == m.edit_distance


def _records(n):
    return [transmit_with_mask(BitString("0" * n), np.ones(n, dtype=np.uint8))]


def test_prune_keeps_separated_chunks():
    chunks = [ChunkInfo(j, 10, "bma", (2,), 10 * i) for i, j in enumerate((100, 300, 500))]
    report = _report("1" * 30, chunks, K2=4)
    pruned, dropped = prune_overlaps(report, _records(1000))
    assert dropped == 0 and pruned.x_hat == report.x_hat


def test_prune_drops_later_overlapping_chunk():
    chunks = [ChunkInfo(100, 10, "bma", (2,), 0), ChunkInfo(105, 10, "bma", (2,), 10), ChunkInfo(300, 10, "bma", (2,), 20)]
    report = _report("0" * 10 + "1" * 10 + "0" * 10, chunks, K2=4)
    pruned, dropped = prune_overlaps(report, _records(1000))
    assert dropped == 1
    assert [c.j for c in pruned.chunks] == [100, 300]
    assert str(pruned.x_hat) == "0" * 20
    assert [c.offset for c in pruned.chunks] == [0, 10]


def test_prune_needs_records():
    with pytest.raises(ValueError):
        prune_overlaps(_report("1"), None)
