"""Latency measurement for the two prediction paths."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import DecodeConfig
from .errors import InputError
from .pipeline import pipeline_predict


@dataclass
class BenchResult:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    qps: float
    n_reps: int
    stage_ms: dict = field(default_factory=dict)


def time_fn(fn, reps: int = 50, warmup: int = 5) -> BenchResult:
    """Wall-clock fn() after warmup; percentiles over individual calls."""
    if reps < 1:
        raise InputError("reps must be >= 1")
    for _ in range(warmup):
        fn()
    times = np.empty(reps)
    for i in range(reps):
        t0 = time.perf_counter()
        fn()
        times[i] = time.perf_counter() - t0
    ms = times * 1000.0
    return BenchResult(
        mean_ms=float(ms.mean()),
        p50_ms=float(np.percentile(ms, 50)),
        p95_ms=float(np.percentile(ms, 95)),
        qps=float(1.0 / times.mean()),
        n_reps=reps,
    )


def bench_paths(s2i_model, asr, text_model, feats_list: list,
                decode: DecodeConfig | None = None, lm=None,
                reps: int = 30, warmup: int = 3) -> dict:
    """Times direct prediction vs. the cascade on the same inputs.

    The cascade result carries a per-stage breakdown averaged over one
    instrumented pass.
    """
    if not feats_list:
        raise InputError("need at least one feature matrix")

    idx = {"i": 0}

    def next_feats():
        f = feats_list[idx["i"] % len(feats_list)]
        idx["i"] += 1
        return f

    def run_e2e():
        s2i_model.predict(next_feats())

    def run_pipeline():
        pipeline_predict(next_feats(), asr, text_model, decode, lm)

    e2e = time_fn(run_e2e, reps, warmup)
    pipe = time_fn(run_pipeline, reps, warmup)

    stage_totals: dict[str, float] = {}
    for f in feats_list:
        res = pipeline_predict(f, asr, text_model, decode, lm)
        for k, v in res.stage_s.items():
            stage_totals[k] = stage_totals.get(k, 0.0) + v
    pipe.stage_ms = {k: 1000.0 * v / len(feats_list)
                     for k, v in stage_totals.items()}
    return {"e2e": e2e, "pipeline": pipe}
