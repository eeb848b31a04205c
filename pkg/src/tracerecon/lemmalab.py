"""Monte Carlo estimates of the match, alignment and anchor events.

Each estimator runs independent trials.  Trial ``i`` draws everything from
``rng.child(i)`` (source bits on the SOURCE stream, deletions on RETENTION,
index choices on HARNESS), so results do not depend on the worker count or
on completion order.  Conditioning is done by rejection: a trial keeps
drawing fresh attempts from ``rng.child(i, attempt)`` until the condition
holds.  If the overall acceptance rate would fall below ``1e-3`` the run
aborts with :class:`ConditioningError` rather than report a biased number.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional, Sequence

import numpy as np

from .alignment import Aligner, is_on_track
from .anchors import AnchorKind, is_trace_useful, scan, source_useful
from .bitcore import BitString, RngHandle, Stream, as_array, sample_uniform
from .blocktest import TestParams, test_match
from .channel import ChannelParams, TraceRecord, transmit, transmit_with_mask
from .reconstruct import PipelineParams

__all__ = [
    "LemmaId",
    "LemmaEstimate",
    "ConditioningError",
    "DeletionChannel",
    "IdentityChannel",
    "wilson_interval",
    "estimate_truematch",
    "estimate_falsematch",
    "estimate_ontrack",
    "estimate_useful_joint",
    "estimate_anchor_correspond",
    "sweep",
    "trend_holds",
    "DEFAULT_LAB_Q",
]

# deletion probability used by the match-test estimators unless told otherwise
DEFAULT_LAB_Q = 0.05
MIN_ACCEPTANCE = 1e-3
_Z95 = 1.959963984540054


class LemmaId(enum.Enum):
    TRUE_MATCH = "truematch"
    FALSE_MATCH = "falsematch"
    ON_TRACK = "ontrack"
    USEFUL_JOINT = "usefuljoint"
    NOT_USEFUL_JOINT = "notusefuljoint"
    ANCHOR_CORRESPOND = "anchorcorrespond"


class ConditioningError(RuntimeError):
    pass


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    phat = successes / trials
    z2 = z * z
    denom = 1 + z2 / trials
    centre = (phat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class LemmaEstimate:
    lemma_id: LemmaId
    trials: int
    successes: int
    condition_params: dict = field(default_factory=dict)
    attempts: Optional[int] = None  # draws including rejected ones

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @property
    def point(self) -> float:
        return self.successes / self.trials

    @property
    def wilson(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials)

    @property
    def ci_width(self) -> float:
        lo, hi = self.wilson
        return hi - lo

    @property
    def acceptance(self) -> Optional[float]:
        return None if not self.attempts else self.trials / self.attempts

    def row(self) -> dict:
        lo, hi = self.wilson
        return {
            "lemma": self.lemma_id.value,
            "trials": self.trials,
            "successes": self.successes,
            "point": self.point,
            "wilson_lo": lo,
            "wilson_hi": hi,
            "attempts": self.attempts,
        }


# channels are small classes rather than closures so trials can run in worker processes
@dataclass(frozen=True)
class DeletionChannel:
    q: float

    def __call__(self, x, rng: RngHandle) -> TraceRecord:
        return transmit(x, ChannelParams(self.q), rng)


@dataclass(frozen=True)
class IdentityChannel:
    """Keeps every bit; replays the all-ones retention mask."""

    def __call__(self, x, rng: RngHandle) -> TraceRecord:
        return transmit_with_mask(x, np.ones(len(x), dtype=bool))


Channel = Callable[[BitString, RngHandle], TraceRecord]


def _streams(rng: RngHandle):
    return rng.with_stream(Stream.SOURCE), rng.with_stream(Stream.RETENTION), rng.with_stream(Stream.HARNESS)


def _run(trial_fn, trials: int, rng: RngHandle, jobs: int, max_attempts: int) -> tuple[list, int]:
    """Run ``trial_fn(rng.child(i), max_attempts)`` for every trial; returns outcomes and attempts.

    ``max_attempts`` caps a single trial.  Hitting the cap, or an overall
    acceptance rate below ``MIN_ACCEPTANCE``, aborts the run.
    """
    fn = partial(trial_fn, max_attempts=max_attempts)
    handles = [rng.child(i) for i in range(trials)]
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    stream = pool.map(fn, handles, chunksize=max(1, trials // (4 * jobs))) if pool else map(fn, handles)
    results, attempts = [], 0
    try:
        for res in stream:
            results.append(res)
            attempts += res[1]
            # stop as soon as the running acceptance rate is clearly under the floor
            if res[0] is None or (attempts >= max_attempts and len(results) / attempts < MIN_ACCEPTANCE):
                break
    finally:
        if pool:
            pool.shutdown(cancel_futures=True)
    if len(results) < trials or any(r is None for r, _ in results) or trials / attempts < MIN_ACCEPTANCE:
        raise ConditioningError(
            f"conditioning accepted {sum(r is not None for r, _ in results)} of {attempts} draws, "
            f"below the floor of {MIN_ACCEPTANCE:g}; the event is too rare at these parameters"
        )
    return [r for r, _ in results], attempts


def _max_attempts() -> int:
    return int(round(10 / MIN_ACCEPTANCE))


# match-test trials ---------------------------------------------------------

def _pair_trial(rng, max_attempts, *, m, test, channel, i, j, condition, p):
    need = max(i, j) + m
    N = math.ceil(1.3 * need / p) + 64
    for a in range(max_attempts):
        src, ret, _ = _streams(rng.child(a))
        x = sample_uniform(N, src)
        U = channel(x, ret.child(0))
        V = channel(x, ret.child(1))
        if len(U) < i + m or len(V) < j + m:
            continue
        if condition(int(U.origin[i]), int(V.origin[j])):
            return test_match(U.trace[i : i + m], V.trace[j : j + m], test).matched, a + 1
    return None, max_attempts


def _aligned(gu, gv, *, bound):
    return abs(gu - gv) <= bound


def _far(gu, gv, *, offset):
    return gu > gv + offset


def estimate_truematch(
    m: int,
    params: TestParams,
    trials: int,
    rng: RngHandle,
    q: float = DEFAULT_LAB_Q,
    channel: Optional[Channel] = None,
    index: int = 0,
    jobs: int = 1,
) -> LemmaEstimate:
    """Match frequency for windows ``U[i:i+m]``, ``V[i:i+m]`` given ``|g_U(i) - g_V(i)| <= m**lam``."""
    if m < 16:
        raise ValueError("m must be at least 16")
    if trials < 100:
        raise ValueError("trials must be at least 100")
    channel = channel or DeletionChannel(q)
    bound = m**params.lam
    fn = partial(
        _pair_trial, m=m, test=params, channel=channel, i=index, j=index,
        condition=partial(_aligned, bound=bound), p=1 - q,
    )
    outcomes, attempts = _run(fn, trials, rng, jobs, _max_attempts())
    cond = dict(m=m, q=q, lam=params.lam, bound=bound, i=index, j=index, alpha=params.alpha, kappa0=params.kappa0)
    return LemmaEstimate(LemmaId.TRUE_MATCH, trials, int(sum(outcomes)), cond, attempts)


def falsematch_index(m: int, beta: float, p: float) -> int:
    """Start in ``U`` whose provenance typically just clears ``m**(1-beta)``."""
    far = m ** (1 - beta)
    return math.ceil(p * (far + 2 * math.sqrt(far))) + 1


def estimate_falsematch(
    m: int,
    params: TestParams,
    trials: int,
    rng: RngHandle,
    q: float = DEFAULT_LAB_Q,
    channel: Optional[Channel] = None,
    index: Optional[int] = None,
    jobs: int = 1,
) -> LemmaEstimate:
    """Match frequency for ``U[i:i+m]`` against ``V[0:m]`` given ``g_U(i) > g_V(0) + m**(1-beta)``."""
    if m < 16:
        raise ValueError("m must be at least 16")
    if trials < 100:
        raise ValueError("trials must be at least 100")
    channel = channel or DeletionChannel(q)
    offset = m ** (1 - params.beta)
    i = falsematch_index(m, params.beta, 1 - q) if index is None else index
    fn = partial(
        _pair_trial, m=m, test=params, channel=channel, i=i, j=0,
        condition=partial(_far, offset=offset), p=1 - q,
    )
    outcomes, attempts = _run(fn, trials, rng, jobs, _max_attempts())
    cond = dict(m=m, q=q, beta=params.beta, offset=offset, i=i, j=0, alpha=params.alpha, kappa0=params.kappa0)
    return LemmaEstimate(LemmaId.FALSE_MATCH, trials, int(sum(outcomes)), cond, attempts)


# pipeline-level trials -----------------------------------------------------

@dataclass
class _Bundle:
    x: BitString
    records: list
    traces: list
    aligner: Aligner

    def j_bounds(self, pipeline: PipelineParams) -> tuple[int, int]:
        first = self.traces[0]
        sched = self.aligner.schedule
        lo_f, hi_f = pipeline.scan_fractions
        lo = max(math.ceil(lo_f * len(first)), 2 * sched.levels[0])
        hi = min(math.floor(hi_f * len(first)), len(first) - sched.K2)
        return lo, hi


def _bundle(n: int, pipeline: PipelineParams, channel: Channel, rng: RngHandle) -> _Bundle:
    src, ret, _ = _streams(rng)
    x = sample_uniform(n, src)
    records = [channel(x, ret.child(t)) for t in range(pipeline.T)]
    traces = [r.trace for r in records]
    aligner = Aligner(
        traces, pipeline.schedule(n), pipeline.test, pipeline.search_radius, pipeline.match_rule
    )
    return _Bundle(x, records, traces, aligner)


def _draw_j(bundle: _Bundle, pipeline: PipelineParams, rng: RngHandle) -> Optional[int]:
    lo, hi = bundle.j_bounds(pipeline)
    if lo > hi:
        return None
    return int(rng.with_stream(Stream.HARNESS).generator.integers(lo, hi + 1))


def _ontrack_trial(rng, max_attempts, *, n, pipeline, channel, j):
    bundle = _bundle(n, pipeline, channel, rng)
    jj = _draw_j(bundle, pipeline, rng) if j is None else j
    if jj is None:
        return None, max_attempts
    outcome = bundle.aligner.align(jj)
    return is_on_track(outcome, bundle.records, pipeline.test.beta), 1


def estimate_ontrack(
    n: int,
    pipeline: PipelineParams,
    trials: int,
    rng: RngHandle,
    channel: Optional[Channel] = None,
    j: Optional[int] = None,
    jobs: int = 1,
) -> LemmaEstimate:
    """Probability that every window is found and stays within ``K2**(1-beta/2)`` in provenance."""
    channel = channel or DeletionChannel(pipeline.channel.q)
    fn = partial(_ontrack_trial, n=n, pipeline=pipeline, channel=channel, j=j)
    outcomes, attempts = _run(fn, trials, rng, jobs, _max_attempts())
    sched = pipeline.schedule(n)
    cond = dict(
        n=n, q=pipeline.channel.q, T=pipeline.T, K1=pipeline.K1, K2=sched.K2,
        bound=sched.K2 ** (1 - pipeline.test.beta / 2), beta=pipeline.test.beta,
    )
    return LemmaEstimate(LemmaId.ON_TRACK, trials, int(sum(outcomes)), cond, attempts)


def _joint_trial(rng, max_attempts, *, n, pipeline, channel):
    bundle = _bundle(n, pipeline, channel, rng)
    jj = _draw_j(bundle, pipeline, rng)
    if jj is None:
        return None, max_attempts
    anchors = pipeline.anchors(bundle.aligner.schedule.K2)
    trace_useful, _ = is_trace_useful(bundle.aligner.align(jj), bundle.traces, anchors, pipeline.T)
    g = int(bundle.records[0].origin[jj])
    try:
        useful = source_useful(bundle.x, g, anchors)
    except ValueError:
        useful = False
    return (trace_useful, useful), 1


def estimate_useful_joint(
    n: int,
    pipeline: PipelineParams,
    trials: int,
    rng: RngHandle,
    channel: Optional[Channel] = None,
    jobs: int = 1,
) -> tuple[LemmaEstimate, LemmaEstimate]:
    """Frequencies of {g(j) useful and j trace-useful} and {g(j) not useful and j trace-useful}.

    The count of trace-useful draws is kept in ``condition_params["trace_useful"]``.
    """
    channel = channel or DeletionChannel(pipeline.channel.q)
    fn = partial(_joint_trial, n=n, pipeline=pipeline, channel=channel)
    outcomes, attempts = _run(fn, trials, rng, jobs, _max_attempts())
    K2 = pipeline.schedule(n).K2
    anchors = pipeline.anchors(K2)
    tu = sum(t for t, _ in outcomes)
    both = sum(t and u for t, u in outcomes)
    cond = dict(
        n=n, q=pipeline.channel.q, T=pipeline.T, K2=K2, trace_useful=tu,
        super_anchor_len=anchors.lengths.super_anchor_len,
        joint_lower_bound=0.25 * 2.0 ** (-anchors.lengths.super_anchor_len),
    )
    return (
        LemmaEstimate(LemmaId.USEFUL_JOINT, trials, both, cond, attempts),
        LemmaEstimate(LemmaId.NOT_USEFUL_JOINT, trials, tu - both, cond, attempts),
    )


def _correspond_trial(rng, max_attempts, *, n, pipeline, channel, draws):
    bundle = None
    anchors = None
    for a in range(max_attempts):
        if a % draws == 0:
            bundle = _bundle(n, pipeline, channel, rng.child(a // draws))
            anchors = pipeline.anchors(bundle.aligner.schedule.K2)
        jj = _draw_j(bundle, pipeline, rng.child(a // draws, a % draws))
        if jj is None:
            continue
        g = int(bundle.records[0].origin[jj])
        K2 = anchors.K2
        if g - K2 < 0 or g + K2 >= len(bundle.x) or not source_useful(bundle.x, g, anchors):
            continue
        useful, flags = is_trace_useful(bundle.aligner.align(jj), bundle.traces, anchors, pipeline.T)
        good = [(t, f) for t, f in enumerate(flags, start=2) if f.good]
        if not useful or not good:
            continue
        seg = as_array(bundle.x)[g - K2 : g + K2 + 1]
        gamma = scan(seg, AnchorKind.ANCHOR, anchors)[0].one_position + g - K2
        t, f = good[0]
        return int(bundle.records[t - 1].origin[f.hit.one_position]) != gamma, a + 1
    return None, max_attempts


def estimate_anchor_correspond(
    n: int,
    pipeline: PipelineParams,
    trials: int,
    rng: RngHandle,
    channel: Optional[Channel] = None,
    draws_per_bundle: int = 1024,
    jobs: int = 1,
) -> LemmaEstimate:
    """Mismatch frequency of the first good trace's anchor 1 against the source anchor's 1.

    Conditions on ``g(j)`` useful, ``j`` trace-useful and at least one good
    trace.  ``successes`` counts mismatches, so ``point`` is the mismatch rate.
    Each source and trace bundle serves ``draws_per_bundle`` index draws.
    """
    channel = channel or DeletionChannel(pipeline.channel.q)
    fn = partial(_correspond_trial, n=n, pipeline=pipeline, channel=channel, draws=draws_per_bundle)
    outcomes, attempts = _run(fn, trials, rng, jobs, _max_attempts())
    K2 = pipeline.schedule(n).K2
    cond = dict(n=n, q=pipeline.channel.q, T=pipeline.T, K2=K2, bound=1 / math.sqrt(K2))
    return LemmaEstimate(LemmaId.ANCHOR_CORRESPOND, trials, int(sum(outcomes)), cond, attempts)


# sweeps --------------------------------------------------------------------

def sweep(estimator: Callable[..., LemmaEstimate], name: str, values: Sequence, **kwargs) -> list[LemmaEstimate]:
    """Call ``estimator(**kwargs, name=value)`` for each value.

    Dotted names reach into dataclass arguments: ``"params.beta"`` replaces
    the ``beta`` field of the ``params`` argument.
    """
    out = []
    for v in values:
        kw = dict(kwargs)
        if "." in name:
            arg, attr = name.split(".", 1)
            kw[arg] = _replace_path(kw[arg], attr, v)
        else:
            kw[name] = v
        out.append(estimator(**kw))
    return out


def _replace_path(obj, path: str, value):
    head, _, rest = path.partition(".")
    if rest:
        return replace(obj, **{head: _replace_path(getattr(obj, head), rest, value)})
    return replace(obj, **{head: value})


def trend_holds(estimates: Sequence[LemmaEstimate], direction: str, slack: float = 2.0) -> bool:
    """True unless a later point moves against ``direction`` by more than ``slack`` CI widths.

    ``direction`` is ``"up"`` (non-decreasing) or ``"down"`` (non-increasing).
    """
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    sign = 1 if direction == "up" else -1
    for a, b in zip(estimates, estimates[1:]):
        tol = slack * max(a.ci_width, b.ci_width)
        if sign * (b.point - a.point) < -tol:
            return False
    return True
