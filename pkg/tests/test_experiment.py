"""Experiment driver: ledger behavior and a micro end-to-end run."""

import json

import pytest

from s2i.config import Config, ModelConfig
from s2i.experiment import (ExperimentPlan, MetricsLedger, load_run,
                            run_experiment)
from s2i.synth import CorpusSizes


def test_ledger_appends_and_reads_back(tmp_path):
    led = MetricsLedger(tmp_path / "m.jsonl")
    led.log("alpha", loss=1.234567891, n=3)
    led.log("beta", note="hi", values=[1, 2])
    rows = led.read()
    assert [r["phase"] for r in rows] == ["alpha", "beta"]
    assert rows[0]["loss"] == 1.234568  # floats rounded to 6 places
    assert rows[0]["n"] == 3
    assert rows[1]["values"] == [1, 2]


def test_ledger_missing_file_reads_empty(tmp_path):
    assert MetricsLedger(tmp_path / "nope.jsonl").read() == []


def micro_setup():
    cfg = Config()
    cfg.model = ModelConfig(hidden_dim=8, model_dim=16, n_heads=2,
                            block_layers=(1, 1, 1))
    cfg.training.asr_epochs = 1
    cfg.training.v1_epochs = 1
    cfg.training.v2_epochs = 1
    cfg.training.pseudo_epochs = 1
    cfg.training.batch_audio_minutes = 0.2
    cfg.training.pseudo_min_confidence = 0.0  # keep the phase alive
    cfg.decode.beam_width = 4
    cfg.decode.n_best = 4
    sizes = CorpusSizes(asr_per_keyword=0, asr_others=4, asr_random_words=2,
                        asr_blank=1, v1_per_intent=1, v2_per_intent=1,
                        pool_size=6, test_per_intent=1)
    plan = ExperimentPlan(seed=3, corpus_seed=3, al_budget=3, sizes=sizes)
    return cfg, plan


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("exp")
    cfg, plan = micro_setup()
    summary = run_experiment(base / "corpus", base / "run", cfg, plan)
    return base, summary


def test_run_leaves_complete_artifact_set(micro_run):
    base, summary = micro_run
    run = base / "run"
    for name in ("asr.ckpt", "s2i_v1.ckpt", "s2i_v2.ckpt", "s2i_final.ckpt",
                 "textintent.ckpt"):
        assert (run / "checkpoints" / name).exists(), name
    for name in ("vocab_char.txt", "vocab_short.txt", "vocab_long.txt",
                 "lm.arpa", "config.yaml", "metrics.jsonl", "summary.json"):
        assert (run / name).exists(), name
    on_disk = json.loads((run / "summary.json").read_text())
    assert on_disk == summary


def test_summary_reports_every_phase(micro_run):
    _, summary = micro_run
    for key in ("asr_wer", "v1_macro_f1", "scratch_macro_f1", "al_picked",
                "v2_macro_f1", "pipeline_macro_f1"):
        assert key in summary, key
    assert summary["al_picked"] == 3


def test_ledger_covers_the_run(micro_run):
    base, _ = micro_run
    rows = MetricsLedger(base / "run" / "metrics.jsonl").read()
    phases = {r["phase"] for r in rows}
    assert {"datagen", "text_artifacts", "asr_train", "asr_eval", "s2i_v1",
            "s2i_v1_eval", "s2i_scratch_eval", "al_select", "s2i_v2",
            "s2i_v2_eval", "pseudo_label", "pipeline_eval"} <= phases
    pseudo = next(r for r in rows if r["phase"] == "pseudo_label")
    # self-labeling candidates are the pool minus what selection took
    assert pseudo["candidates"] == 6 - 3


def test_artifacts_reload(micro_run):
    base, _ = micro_run
    asr, s2i, text_model, lm = load_run(base / "run")
    assert len(asr.vocabs) == 3
    intent, conf = text_model.classify("hey alarm")
    assert 0.0 <= conf <= 1.0


def test_same_seed_reproduces_summary(micro_run, tmp_path):
    base, summary = micro_run
    cfg, plan = micro_setup()
    again = run_experiment(tmp_path / "corpus", tmp_path / "run", cfg, plan)
    assert again == summary
