import numpy as np
import pytest

from tracerecon.bitcore import BitString, RngHandle, sample_uniform
from tracerecon.channel import ChannelParams, bare_traces, transmit_many
from tracerecon.prefixrecon import (
    DEFAULT_STRATEGY,
    PrefixTask,
    available_strategies,
    bma,
    get_strategy,
    reconstruct_prefix,
    register_strategy,
)


def test_registry_contents():
    assert {"bma", "bma-runs", "oracle"} <= set(available_strategies())
    assert DEFAULT_STRATEGY == "bma-runs"
    assert get_strategy("bma") is bma


def test_duplicate_registration():
    with pytest.raises(ValueError):
        register_strategy("bma", bma)


def test_unknown_strategy():
    with pytest.raises(KeyError):
        get_strategy("nope")


def test_register_and_use():
    def zeros(task):
        return get_strategy("oracle")(PrefixTask(task.suffixes, task.k, task.p, BitString("0" * task.k)))

    register_strategy("test-zeros", zeros)
    x = sample_uniform(100, RngHandle(1))
    res = reconstruct_prefix(PrefixTask([x, x], 10, 1.0), "test-zeros")
    assert str(res.bits) == "0" * 10


@pytest.mark.parametrize("strategy", ["bma", "bma-runs"])
def test_identical_suffixes(strategy):
    x = sample_uniform(500, RngHandle(5))
    res = reconstruct_prefix(PrefixTask([x] * 5, 300, 1.0), strategy)
    assert res.bits == x[:300]
    assert res.confidence.shape == (300,)


def test_oracle_reads_truth():
    x = sample_uniform(1000, RngHandle(2))
    recs = transmit_many(x, ChannelParams(0.5), RngHandle(2, key=(1,)), 4)
    res = reconstruct_prefix(PrefixTask(bare_traces(recs), 200, 0.5, truth=x), "oracle")
    assert res.bits == x[:200]
    with pytest.raises(ValueError):
        reconstruct_prefix(PrefixTask(bare_traces(recs), 200, 0.5), "oracle")


def test_preconditions():
    x = sample_uniform(100, RngHandle(3))
    with pytest.raises(ValueError):
        reconstruct_prefix(PrefixTask([x], 10, 1.0))
    with pytest.raises(ValueError):
        reconstruct_prefix(PrefixTask([x, x], 60, 0.5))
    with pytest.raises(ValueError):
        reconstruct_prefix(PrefixTask([x, x], -1, 0.5))


def _exact_rate(strategy, trials, T=32, q=0.1, k=256):
    ok = 0
    for trial in range(trials):
        x = sample_uniform(k * 2, RngHandle(trial, key=(0,)))
        recs = transmit_many(x, ChannelParams(q), RngHandle(trial, key=(1,)), T)
        res = reconstruct_prefix(PrefixTask(bare_traces(recs), k, 1 - q), strategy)
        ok += res.bits == x[:k]
    return ok / trials


def test_default_strategy_exact_prefix_rate():
    assert _exact_rate(DEFAULT_STRATEGY, 200) >= 0.9


def test_short_traces_are_padded():
    # cursors run off the end of very short suffixes; output still has length k
    res = bma(PrefixTask([BitString("1"), BitString("1")], 0, 0.5))
    assert len(res.bits) == 0
    res = get_strategy("bma-runs")(PrefixTask([BitString("10"), BitString("1")], 2, 1.0))
    assert len(res.bits) == 2
    assert np.all((res.confidence >= 0) & (res.confidence <= 1))
