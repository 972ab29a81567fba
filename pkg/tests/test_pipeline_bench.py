"""Cascade wrapper and latency measurement, exercised with stubs."""

import numpy as np
import pytest

from s2i.bench import bench_paths, time_fn
from s2i.errors import InputError, StageError
from s2i.pipeline import pipeline_predict


class FakeHyp:
    def __init__(self, text):
        self.text = text


class FakeAsr:
    def __init__(self, text="go alarm", fail=False):
        self.text = text
        self.fail = fail

    def transcribe(self, feats, decode=None, lm=None, level=-1):
        if self.fail:
            raise RuntimeError("decoder blew up")
        return FakeHyp(self.text)


class FakeClassifier:
    def __init__(self, intent=3, conf=0.8, fail=False):
        self.intent = intent
        self.conf = conf
        self.fail = fail
        self.seen = []

    def classify(self, text):
        if self.fail:
            raise RuntimeError("classifier blew up")
        self.seen.append(text)
        return self.intent, self.conf

    def predict(self, feats):
        return self.intent, self.conf


def test_pipeline_result_carries_both_stages():
    clf = FakeClassifier(intent=7, conf=0.55)
    res = pipeline_predict(np.zeros((4, 3)), FakeAsr("hey zoom"), clf)
    assert res.intent == 7
    assert res.confidence == 0.55
    assert res.transcript == "hey zoom"
    assert clf.seen == ["hey zoom"]
    assert set(res.stage_s) == {"decode", "classify"}
    assert all(v >= 0.0 for v in res.stage_s.values())


def test_decode_failure_is_tagged():
    with pytest.raises(StageError) as exc:
        pipeline_predict(np.zeros((4, 3)), FakeAsr(fail=True), FakeClassifier())
    assert exc.value.stage == "decode"


def test_classify_failure_is_tagged():
    with pytest.raises(StageError) as exc:
        pipeline_predict(np.zeros((4, 3)), FakeAsr(),
                         FakeClassifier(fail=True))
    assert exc.value.stage == "classify"


def test_time_fn_counts_warmup_and_reps():
    calls = []
    out = time_fn(lambda: calls.append(1), reps=7, warmup=2)
    assert len(calls) == 9
    assert out.n_reps == 7
    assert out.mean_ms >= 0.0
    assert out.p50_ms <= out.p95_ms
    assert out.qps > 0.0


def test_time_fn_rejects_zero_reps():
    with pytest.raises(InputError):
        time_fn(lambda: None, reps=0)


def test_bench_paths_reports_both_routes():
    feats = [np.zeros((4, 3)), np.ones((4, 3))]
    out = bench_paths(FakeClassifier(), FakeAsr(), FakeClassifier(), feats,
                      reps=3, warmup=1)
    assert set(out) == {"e2e", "pipeline"}
    assert out["pipeline"].stage_ms.keys() == {"decode", "classify"}
    assert out["e2e"].n_reps == 3


def test_bench_paths_needs_input():
    with pytest.raises(InputError):
        bench_paths(FakeClassifier(), FakeAsr(), FakeClassifier(), [])
