"""Command-line harness.

Subcommands ``simulate``, ``reconstruct``, ``lemmas``, ``sweep`` and ``code``
write one CSV (or JSON) record per trial.  CSV output starts with ``#`` lines
carrying the schema version and the fully resolved configuration; the data
rows are deterministic for a fixed configuration apart from ``wall_ms``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags, later sources winning.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from . import lemmalab
from .bitcore import RngHandle, Stream, sample_uniform
from .blocktest import TestParams
from .channel import ChannelParams, bare_traces, transmit_many
from .codedtr import build_code_greedy, code_rate, decode, pairwise_ok, save_code
from .prefixrecon import available_strategies
from .reconstruct import PipelineParams, reconstruct

SCHEMA_VERSION = 1

COLUMNS = {
    "simulate": ["seed", "trial", "n", "q", "T", "mean_len", "min_len", "max_len", "provenance_ok", "wall_ms"],
    "reconstruct": [
        "seed", "trial", "n", "q", "T", "K2", "chunks", "coverage", "edit_distance", "normalized_de", "wall_ms",
    ],
    "lemmas": [
        "lemma", "seed", "m", "n", "q", "T", "K2", "trials", "successes", "point", "wilson_lo", "wilson_hi",
        "attempts", "wall_ms",
    ],
    "code": [
        "seed", "n", "radius", "size", "rate", "pairwise_ok", "decode_trials", "decode_successes", "decode_rate",
        "wall_ms",
    ],
}
COLUMNS["sweep"] = ["param", "value"] + COLUMNS["lemmas"]

DEFAULTS = {
    "seed": 0,
    "trials": 10,
    "T": 8,
    "K1": 64,
    "alpha": 0.495,
    "kappa0": 0.16,
    "beta": 0.2,
    "lam": 0.5025,
    "c0": 0.005,
    "C8": 1.0,
    "C9": 2.0,
    "C10": 1.5,
    "eps": 0.1,
    "strategy": "bma-runs",
    "match_rule": "leftmost",
    "search_radius": None,
    "full_string": False,
    "desk_override": False,
    "out": "-",
    "format": "csv",
    "jobs": 1,
    "which": "truematch",
    "m": 4096,
    "radius": 4,
    "max_codewords": None,
    "export": None,
    "param": "m",
    "values": None,
}
# per-command defaults for settings whose sensible value depends on the experiment
COMMAND_DEFAULTS = {
    "simulate": {"n": 65536, "q": 0.2},
    "reconstruct": {"n": 65536, "q": 0.2},
    "lemmas": {"n": 65536, "q": None, "trials": 100},
    "sweep": {"n": 65536, "q": None, "trials": 100},
    "code": {"n": 16, "q": 0.1, "T": 16, "trials": 100},
}

_BOOL = {"true": True, "1": True, "yes": True, "on": True, "false": False, "0": False, "no": False, "off": False}
_TYPES = {
    "seed": int, "trials": int, "T": int, "K1": int, "n": int, "m": int, "radius": int, "jobs": int,
    "max_codewords": int, "search_radius": int, "alpha": float, "kappa0": float, "beta": float, "lam": float,
    "c0": float, "C8": float, "C9": float, "C10": float, "eps": float, "q": float,
    "full_string": "bool", "desk_override": "bool",
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, value: str):
    kind = _TYPES.get(key, str)
    if value.lower() in ("none", ""):
        return None
    try:
        if kind == "bool":
            return _BOOL[value.lower()]
        return kind(value)
    except (KeyError, ValueError):
        raise ConfigError(f"invalid value for {key}: {value!r}") from None


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS and key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("experiment")
    g.add_argument("--config", help="file of 'key = value' lines; flags override it")
    g.add_argument("--n", type=int, help="source length")
    g.add_argument("--q", type=float, help="deletion probability")
    g.add_argument("--T", type=int, help="number of traces")
    g.add_argument("--seed", type=int)
    g.add_argument("--trials", type=int)
    g.add_argument("--jobs", type=int, help="worker processes")
    g.add_argument("--out", help="output path, '-' for stdout")
    g.add_argument("--format", choices=["csv", "json"])
    p = common.add_argument_group("parameters")
    p.add_argument("--K1", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa0", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--c0", type=float)
    p.add_argument("--C8", type=float)
    p.add_argument("--C9", type=float)
    p.add_argument("--C10", type=float)
    p.add_argument("--strategy", choices=available_strategies())
    p.add_argument("--match-rule", dest="match_rule", choices=["leftmost", "best"])
    p.add_argument("--search-radius", dest="search_radius", type=int)
    p.add_argument("--full-string", dest="full_string", action="store_true")
    p.add_argument(
        "--desk-override", dest="desk_override", action="store_true",
        help="unlock parameter ranges outside the theoretical ones (recorded in the output)",
    )

    parser = argparse.ArgumentParser(prog="tracerecon", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="draw sources and traces, report trace statistics")
    sub.add_parser("reconstruct", parents=[common], help="run the reconstruction pipeline")
    lem = sub.add_parser("lemmas", parents=[common], help="Monte Carlo estimate of one lemma event")
    sw = sub.add_parser("sweep", parents=[common], help="lemma estimates over a list of parameter values")
    for sp in (lem, sw):
        sp.add_argument("--which", choices=[e.value for e in lemmalab.LemmaId if e.value != "notusefuljoint"])
        sp.add_argument("--m", type=int, help="window length for the match estimators")
    sw.add_argument("--param", help="parameter to vary, e.g. m, beta, K1, T")
    sw.add_argument("--values", help="comma-separated values")
    code = sub.add_parser("code", parents=[common], help="build a greedy edit-distance code and test decoding")
    code.add_argument("--radius", type=int)
    code.add_argument("--max-codewords", dest="max_codewords", type=int)
    code.add_argument("--export", help="write the code to this file")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[args.command])
    flags = vars(args).copy()
    command = flags.pop("command")
    path = flags.pop("config", None)
    if path is not None:
        cfg.update(read_config(path))
    cfg.update(flags)
    cfg["command"] = command
    if cfg["q"] is None:
        cfg["q"] = lemmalab.DEFAULT_LAB_Q if cfg["which"] in ("truematch", "falsematch") else 0.2
    return cfg


def test_params(cfg: dict) -> TestParams:
    return TestParams(cfg["alpha"], cfg["kappa0"], cfg["beta"], cfg["lam"], cfg["desk_override"])


def pipeline_params(cfg: dict) -> PipelineParams:
    return PipelineParams(
        ChannelParams(cfg["q"]),
        test=test_params(cfg),
        T=cfg["T"],
        K1=cfg["K1"],
        C10=cfg["C10"],
        c0=cfg["c0"],
        C8=cfg["C8"],
        C9=cfg["C9"],
        eps=cfg["eps"],
        strategy=cfg["strategy"],
        full_string=cfg["full_string"],
        search_radius=cfg["search_radius"],
        match_rule=cfg["match_rule"],
    )


def validate(cfg: dict) -> None:
    """Raise ``ValueError`` naming the first offending field."""
    for key in ("n", "T", "trials", "jobs"):
        if cfg.get(key) is not None and cfg[key] < 1:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    test_params(cfg)
    if cfg["command"] != "code" or cfg["n"] >= 2:
        pipeline_params(cfg)
    ChannelParams(cfg["q"])


# one function per trial so --jobs can farm them out -----------------------

def _simulate_trial(trial: int, cfg: dict) -> dict:
    t0 = time.perf_counter()
    x = sample_uniform(cfg["n"], RngHandle(cfg["seed"], Stream.SOURCE, (trial,)))
    recs = transmit_many(x, ChannelParams(cfg["q"]), RngHandle(cfg["seed"], Stream.RETENTION, (trial,)), cfg["T"])
    lengths = [len(r) for r in recs]
    ok = all(np.array_equal(r.trace.bits, x.bits[r.origin]) for r in recs)
    return {
        "seed": cfg["seed"], "trial": trial, "n": cfg["n"], "q": cfg["q"], "T": cfg["T"],
        "mean_len": float(np.mean(lengths)), "min_len": min(lengths), "max_len": max(lengths),
        "provenance_ok": ok, "wall_ms": round(1000 * (time.perf_counter() - t0), 3),
    }


def _reconstruct_trial(trial: int, cfg: dict) -> dict:
    t0 = time.perf_counter()
    pp = pipeline_params(cfg)
    x = sample_uniform(cfg["n"], RngHandle(cfg["seed"], Stream.SOURCE, (trial,)))
    recs = transmit_many(x, pp.channel, RngHandle(cfg["seed"], Stream.RETENTION, (trial,)), pp.T)
    report = reconstruct(bare_traces(recs), pp, truth=x, records=recs)
    m = report.metrics
    return {
        "seed": cfg["seed"], "trial": trial, "n": cfg["n"], "q": cfg["q"], "T": cfg["T"], "K2": report.K2,
        "chunks": m.chunks, "coverage": m.coverage, "edit_distance": m.edit_distance,
        "normalized_de": m.normalized_de, "wall_ms": round(1000 * (time.perf_counter() - t0), 3),
    }


def _lemma_rows(cfg: dict) -> list[dict]:
    t0 = time.perf_counter()
    rng = RngHandle(cfg["seed"], Stream.HARNESS)
    which = cfg["which"]
    jobs = cfg["jobs"]
    if which in ("truematch", "falsematch"):
        fn = lemmalab.estimate_truematch if which == "truematch" else lemmalab.estimate_falsematch
        ests = [fn(cfg["m"], test_params(cfg), cfg["trials"], rng, q=cfg["q"], jobs=jobs)]
    else:
        pp = pipeline_params(cfg)
        fn = {
            "ontrack": lemmalab.estimate_ontrack,
            "usefuljoint": lemmalab.estimate_useful_joint,
            "anchorcorrespond": lemmalab.estimate_anchor_correspond,
        }[which]
        res = fn(cfg["n"], pp, cfg["trials"], rng, jobs=jobs)
        ests = list(res) if isinstance(res, tuple) else [res]
    wall = round(1000 * (time.perf_counter() - t0), 3)
    rows = []
    for e in ests:
        c = e.condition_params
        lo, hi = e.wilson
        rows.append({
            "lemma": e.lemma_id.value, "seed": cfg["seed"], "m": c.get("m", ""), "n": c.get("n", ""),
            "q": cfg["q"], "T": c.get("T", ""), "K2": c.get("K2", ""), "trials": e.trials,
            "successes": e.successes, "point": e.point, "wilson_lo": lo, "wilson_hi": hi,
            "attempts": e.attempts, "wall_ms": wall,
        })
    return rows


def _code_rows(cfg: dict) -> list[dict]:
    t0 = time.perf_counter()
    code = build_code_greedy(cfg["n"], cfg["radius"], RngHandle(cfg["seed"], Stream.HARNESS), cfg["max_codewords"])
    if cfg["export"]:
        save_code(code, cfg["export"])
    pp = replace(pipeline_params(cfg), min_n_guard=max(1024, 2 * cfg["n"]))
    ok = 0
    for trial in range(cfg["trials"]):
        pick = RngHandle(cfg["seed"], Stream.HARNESS, (1, trial)).generator.integers(len(code))
        s = code.codewords[int(pick)]
        recs = transmit_many(s, pp.channel, RngHandle(cfg["seed"], Stream.RETENTION, (trial,)), pp.T)
        ok += decode(bare_traces(recs), code, pp) == s
    return [{
        "seed": cfg["seed"], "n": cfg["n"], "radius": cfg["radius"], "size": len(code), "rate": code_rate(code),
        "pairwise_ok": pairwise_ok(code), "decode_trials": cfg["trials"], "decode_successes": ok,
        "decode_rate": ok / cfg["trials"] if cfg["trials"] else 0.0,
        "wall_ms": round(1000 * (time.perf_counter() - t0), 3),
    }]


def _sweep_rows(cfg: dict) -> list[dict]:
    if not cfg["values"]:
        raise ConfigError("values must list at least one value for the sweep")
    key = cfg["param"].replace("-", "_")
    if key not in _TYPES:
        raise ConfigError(f"param {key!r} cannot be swept")
    rows = []
    for raw in str(cfg["values"]).split(","):
        sub = dict(cfg)
        sub[key] = _coerce(key, raw.strip())
        validate(sub)
        for row in _lemma_rows(sub):
            rows.append({"param": key, "value": sub[key], **row})
    return rows


def _per_trial(fn, cfg: dict) -> list[dict]:
    work = partial(fn, cfg=cfg)
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            return list(pool.map(work, range(cfg["trials"])))
    return [work(t) for t in range(cfg["trials"])]


def collect(cfg: dict) -> list[dict]:
    command = cfg["command"]
    if command == "simulate":
        return _per_trial(_simulate_trial, cfg)
    if command == "reconstruct":
        return _per_trial(_reconstruct_trial, cfg)
    if command == "lemmas":
        return _lemma_rows(cfg)
    if command == "sweep":
        return _sweep_rows(cfg)
    return _code_rows(cfg)


def _embedded_config(cfg: dict) -> dict:
    return {k: cfg[k] for k in sorted(cfg) if k not in ("out",)}


def render(cfg: dict, rows: list[dict]) -> str:
    columns = COLUMNS[cfg["command"]]
    meta = _embedded_config(cfg)
    if cfg["format"] == "json":
        doc = {"schema_version": SCHEMA_VERSION, "command": cfg["command"], "config": meta, "columns": columns, "rows": rows}
        return json.dumps(doc, indent=2, default=str) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write(f"# config: {json.dumps(meta, sort_keys=True, default=str)}\n")
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in columns})
    return buf.getvalue()


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        validate(cfg)
    except (ValueError, OSError) as exc:
        print(f"tracerecon: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        rows = collect(cfg)
    except lemmalab.ConditioningError as exc:
        print(f"tracerecon: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"tracerecon: invalid configuration: {exc}", file=sys.stderr)
        return 2
    text = render(cfg, rows)
    if cfg["out"] == "-":
        sys.stdout.write(text)
    else:
        try:
            Path(cfg["out"]).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"tracerecon: cannot write {cfg['out']}: {exc}", file=sys.stderr)
            return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
