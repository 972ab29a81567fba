"""End-to-end smoke of the command-line surface on a micro corpus.

Everything trains for an epoch on five tiny utterances, so these stay in
smoke-test territory; the numeric claims live in the module tests.
"""

import json

import numpy as np
import pytest
import yaml

from s2i.cli import main
from s2i.config import Config, ModelConfig
from s2i.data import FeatureStore, by_split, load_manifest
from s2i.experiment import build_text_artifacts
from s2i.models import HctcModel, S2IModel
from s2i.synth import BLANK_INTENT, N_INTENTS, OTHERS_INTENT, CorpusWriter
from s2i.textintent import TextIntentModel, TfidfVocab
from s2i import training


@pytest.fixture(scope="module")
def env(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    root, run_dir = base / "corpus", base / "run"
    (run_dir / "checkpoints").mkdir(parents=True)

    cfg = Config()
    cfg.model = ModelConfig(hidden_dim=8, model_dim=16, n_heads=2,
                            block_layers=(1, 1, 1))
    cfg.training.batch_audio_minutes = 1.0

    w = CorpusWriter(root, cfg.synth, seed=9)
    for text in ("ab", "cd", "go ab", "ha"):
        w.add("asr_train", text, OTHERS_INTENT, 0)
    w.add("asr_train", "", BLANK_INTENT, 0)
    for text in ("ab", "cd"):
        w.add("v1_train", text, OTHERS_INTENT, 0)
    for text in ("ab", "go ab", ""):
        w.add("test", text, OTHERS_INTENT if text else BLANK_INTENT, 0)
    for text in ("cd", "ha", "ab", "go cd"):
        w.add("pool", text, None, 0)
    w.finish()

    records = load_manifest(root)
    store = FeatureStore(root, cfg.features)
    asr_train = by_split(records, "asr_train")
    vocabs, lm = build_text_artifacts([r.text for r in asr_train], cfg)
    for v in vocabs:
        v.save(run_dir / f"vocab_{v.level}.txt")
    lm.save_arpa(run_dir / "lm.arpa")

    asr = HctcModel(cfg.model, cfg.features.stacked_dim, vocabs,
                    np.random.default_rng(1))
    training.train_asr(asr, asr_train, store, cfg.training, seed=1, epochs=1)
    asr.save(run_dir / "checkpoints" / "asr.ckpt")

    s2i = S2IModel(asr, N_INTENTS, np.random.default_rng(2))
    s2i.save(run_dir / "checkpoints" / "s2i_v1.ckpt")

    tv = TfidfVocab.fit(["ab", "cd", "go ab", "ha"])
    tm = TextIntentModel(tv, N_INTENTS, BLANK_INTENT, np.random.default_rng(3))
    tm.fit(["ab", "cd", "go ab", "ha"], [OTHERS_INTENT] * 4)
    tm.save(run_dir / "checkpoints" / "textintent.ckpt")

    tiny_yaml = base / "tiny.yaml"
    tiny_yaml.write_text(yaml.safe_dump({
        "model": {"hidden_dim": 8, "model_dim": 16, "n_heads": 2,
                  "block_layers": [1, 1, 1]},
        "training": {"asr_epochs": 1, "batch_audio_minutes": 1.0},
    }))
    return {"root": str(root), "run": str(run_dir), "base": base,
            "yaml": str(tiny_yaml), "wav": str(root / "wavs" / "u00000.wav")}


def test_missing_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_featurize_reports_shape_and_saves(env, capsys, tmp_path):
    out = tmp_path / "feats.npy"
    rc = main(["featurize", "--wav", env["wav"], "--out", str(out)])
    assert rc == 0
    msg = capsys.readouterr().out
    assert "frames" in msg
    arr = np.load(out)
    assert arr.ndim == 2 and arr.shape[0] > 0


def test_predict_direct_path(env, capsys):
    rc = main(["predict", "--run-dir", env["run"], "--wav", env["wav"]])
    assert rc == 0
    assert "intent:" in capsys.readouterr().out


def test_predict_pipeline_path(env, capsys):
    rc = main(["predict", "--run-dir", env["run"], "--wav", env["wav"],
               "--pipeline"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "transcript:" in out and "intent:" in out


def test_predict_without_checkpoints_fails(env, tmp_path, capsys):
    empty = tmp_path / "empty_run"
    empty.mkdir()
    with pytest.raises(SystemExit):
        main(["predict", "--run-dir", str(empty), "--wav", env["wav"]])


def test_decode_reports_wer(env, capsys):
    rc = main(["decode", "--root", env["root"], "--run-dir", env["run"],
               "--split", "test", "--level", "0", "--verbose"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "WER" in out
    assert "hyp=" in out  # verbose per-utterance lines


def test_evaluate_prints_both_paths(env, capsys):
    rc = main(["evaluate", "--root", env["root"], "--run-dir", env["run"],
               "--split", "test"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "direct:" in out and "cascade:" in out


def test_al_select_prints_k_ids(env, capsys):
    rc = main(["al-select", "--root", env["root"], "--run-dir", env["run"],
               "--k", "2"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert all(line.startswith("u") for line in lines)


def test_pseudo_label_writes_manifest(env, capsys, tmp_path):
    out = tmp_path / "pseudo.jsonl"
    rc = main(["pseudo-label", "--root", env["root"], "--run-dir", env["run"],
               "--min-conf", "0.0", "--out", str(out)])
    assert rc == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 4  # every pool item clears a zero threshold
    assert all(r["split"] == "pseudo" for r in rows)


def test_train_asr_command_produces_run_artifacts(env, capsys, tmp_path):
    run2 = tmp_path / "run2"
    rc = main(["train-asr", "--root", env["root"], "--run-dir", str(run2),
               "--config", env["yaml"], "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "test WER" in out
    assert (run2 / "checkpoints" / "asr.ckpt").exists()
    assert (run2 / "lm.arpa").exists()
    ledger_rows = [json.loads(l)
                   for l in (run2 / "metrics.jsonl").read_text().splitlines()]
    kinds = {r["phase"] for r in ledger_rows}
    assert {"asr_train", "asr_eval"} <= kinds


def test_train_s2i_command_saves_checkpoint(env, capsys):
    rc = main(["train-s2i", "--root", env["root"], "--run-dir", env["run"],
               "--config", env["yaml"], "--epochs", "1",
               "--out-name", "s2i_smoke.ckpt"])
    assert rc == 0
    ckpt = env["base"] / "run" / "checkpoints" / "s2i_smoke.ckpt"
    assert ckpt.exists()
    S2IModel.load(ckpt)  # loads back cleanly


def test_bench_command_reports_latency(env, capsys):
    rc = main(["bench", "--root", env["root"], "--run-dir", env["run"],
               "--split", "test", "--n-utts", "1", "--reps", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "e2e:" in out and "pipeline:" in out
