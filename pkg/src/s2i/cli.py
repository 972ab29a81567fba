"""Command-line entry points.

Every subcommand works off two directories: a corpus root (WAVs plus
manifest) and a run directory (vocabularies, language model,
checkpoints, metrics ledger).  `run-plan` strings all phases together;
the other subcommands expose the individual steps.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, synth, training
from .audio import read_wav
from .config import Config
from .data import FeatureStore, by_split, load_manifest
from .experiment import (ExperimentPlan, MetricsLedger, build_text_artifacts,
                         run_experiment)
from .features import featurize
from .models import HctcModel, S2IModel
from .ngram import NgramLm
from .synth import BLANK_INTENT, INTENT_NAMES, N_INTENTS
from .textintent import TextIntentModel, TfidfVocab


def _load_config(args) -> Config:
    return Config.load(getattr(args, "config", None))


def _ckpt(run_dir: str, name: str) -> Path:
    return Path(run_dir) / "checkpoints" / name


def _latest_s2i(run_dir: str) -> Path:
    for name in ("s2i_final.ckpt", "s2i_v2.ckpt", "s2i_v1.ckpt"):
        p = _ckpt(run_dir, name)
        if p.exists():
            return p
    raise SystemExit(f"no intent checkpoint under {run_dir}/checkpoints")


def _intent_name(intent: int) -> str:
    if 0 <= intent < len(INTENT_NAMES):
        return INTENT_NAMES[intent]
    return str(intent)


def cmd_datagen(args) -> int:
    cfg = _load_config(args)
    path = synth.generate_corpus(args.root, cfg.synth, seed=args.seed)
    records = load_manifest(args.root)
    splits = {}
    for r in records:
        splits[r.split] = splits.get(r.split, 0) + 1
    print(f"wrote {len(records)} utterances to {path}")
    for split in sorted(splits):
        print(f"  {split}: {splits[split]}")
    return 0


def cmd_featurize(args) -> int:
    cfg = _load_config(args)
    buf = read_wav(args.wav)
    fm = featurize(buf, cfg.features)
    print(f"{args.wav}: {buf.duration_s:.3f}s -> {fm.frames.shape[0]} frames "
          f"x {fm.frames.shape[1]} dims "
          f"(stride {fm.frame_stride_ms:.0f} ms, "
          f"window {fm.receptive_field_ms:.0f} ms)")
    if args.out:
        np.save(args.out, fm.frames)
        print(f"saved {args.out}")
    return 0


def cmd_train_asr(args) -> int:
    cfg = _load_config(args)
    run_dir = Path(args.run_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    records = load_manifest(args.root)
    train = by_split(records, "asr_train")
    store = FeatureStore(args.root, cfg.features)
    ledger = MetricsLedger(run_dir / "metrics.jsonl")

    vocabs, lm = build_text_artifacts([r.text for r in train], cfg)
    for v in vocabs:
        v.save(run_dir / f"vocab_{v.level}.txt")
    lm.save_arpa(run_dir / "lm.arpa")

    rng = np.random.default_rng(args.seed)
    model = HctcModel(cfg.model, cfg.features.stacked_dim, vocabs, rng)
    for h in training.train_asr(model, train, store, cfg.training, args.seed):
        ledger.log("asr_train", epoch=h.epoch, loss=h.loss,
                   utterances=h.n_utterances, skipped=h.skipped)
        print(f"epoch {h.epoch}: loss {h.loss:.4f} "
              f"({h.n_utterances} utts, {h.skipped} skipped)")
    model.save(_ckpt(args.run_dir, "asr.ckpt"))
    test = by_split(records, "test")
    if test:
        rep = training.asr_wer(model, test, store, cfg.decode, lm)
        ledger.log("asr_eval", wer=rep.wer, ref_words=rep.ref_words)
        print(f"test WER {rep.wer:.4f} over {rep.ref_words} words")
    print(f"saved {_ckpt(args.run_dir, 'asr.ckpt')}")
    return 0


def cmd_train_s2i(args) -> int:
    cfg = _load_config(args)
    records = load_manifest(args.root)
    train = by_split(records, args.split)
    store = FeatureStore(args.root, cfg.features)
    ledger = MetricsLedger(Path(args.run_dir) / "metrics.jsonl")
    rng = np.random.default_rng(args.seed)
    if args.scratch:
        vocabs = [d for d in (HctcModel.load(_ckpt(args.run_dir, "asr.ckpt")).vocabs)] \
            if _ckpt(args.run_dir, "asr.ckpt").exists() else None
        if vocabs is None:
            vocabs, _ = build_text_artifacts(
                [r.text for r in by_split(records, "asr_train")], cfg)
        trunk = HctcModel(cfg.model, cfg.features.stacked_dim, vocabs, rng)
    else:
        trunk = HctcModel.load(_ckpt(args.run_dir, "asr.ckpt"))
        trunk.config.pool = cfg.model.pool
    model = S2IModel(trunk, N_INTENTS, rng)
    trunk.set_freeze(cfg.model.freeze_blocks)
    for h in training.finetune_s2i(model, train, store, cfg.training,
                                   args.seed, args.epochs):
        ledger.log("s2i_train", epoch=h.epoch, loss=h.loss, split=args.split)
        print(f"epoch {h.epoch}: loss {h.loss:.4f}")
    out = _ckpt(args.run_dir, args.out_name)
    model.save(out)
    print(f"saved {out}")
    return 0


def cmd_decode(args) -> int:
    cfg = _load_config(args)
    model = HctcModel.load(_ckpt(args.run_dir, "asr.ckpt"))
    lm_path = Path(args.run_dir) / "lm.arpa"
    lm = NgramLm.load_arpa(lm_path) if lm_path.exists() and not args.no_lm else None
    records = by_split(load_manifest(args.root), args.split)
    store = FeatureStore(args.root, cfg.features)
    refs, hyps = [], []
    for rec in records:
        res = model.transcribe(store.features(rec), cfg.decode, lm, args.level)
        refs.append(rec.text)
        hyps.append(res.text)
        if args.verbose:
            print(f"{rec.utt_id}\tref={rec.text!r}\thyp={res.text!r}")
    from .metrics import wer

    rep = wer(refs, hyps)
    print(f"{args.split}: WER {rep.wer:.4f} "
          f"(S={rep.substitutions} I={rep.insertions} D={rep.deletions} "
          f"/ {rep.ref_words} words, {rep.n_utterances} utts)")
    return 0


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    buf = read_wav(args.wav)
    feats = featurize(buf, cfg.features).frames
    if args.pipeline:
        from .pipeline import pipeline_predict

        asr = HctcModel.load(_ckpt(args.run_dir, "asr.ckpt"))
        text_model = TextIntentModel.load(_ckpt(args.run_dir, "textintent.ckpt"))
        lm_path = Path(args.run_dir) / "lm.arpa"
        lm = NgramLm.load_arpa(lm_path) if lm_path.exists() else None
        res = pipeline_predict(feats, asr, text_model, cfg.decode, lm)
        print(f"transcript: {res.transcript!r}")
        print(f"intent: {_intent_name(res.intent)} ({res.confidence:.3f})")
    else:
        model = S2IModel.load(_latest_s2i(args.run_dir))
        intent, conf = model.predict(feats)
        print(f"intent: {_intent_name(intent)} ({conf:.3f})")
    return 0


def cmd_al_select(args) -> int:
    cfg = _load_config(args)
    model = S2IModel.load(_latest_s2i(args.run_dir))
    records = by_split(load_manifest(args.root), args.split)
    store = FeatureStore(args.root, cfg.features)
    picked = training.select_low_confidence(
        model, records, store, cfg.training.al_mode, k=args.k,
        threshold=cfg.training.al_threshold, seed=args.seed)
    for rec in picked:
        print(rec.utt_id)
    return 0


def cmd_pseudo_label(args) -> int:
    cfg = _load_config(args)
    model = S2IModel.load(_latest_s2i(args.run_dir))
    records = by_split(load_manifest(args.root), args.split)
    store = FeatureStore(args.root, cfg.features)
    kept = training.pseudo_label(model, records, store, args.min_conf)
    from .data import save_manifest

    save_manifest(args.out, kept)
    print(f"kept {len(kept)} of {len(records)} -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    records = by_split(load_manifest(args.root), args.split)
    store = FeatureStore(args.root, cfg.features)
    model = S2IModel.load(_latest_s2i(args.run_dir))
    rep, _, _ = training.evaluate_s2i(model, records, store, N_INTENTS)
    print(f"direct:   acc {rep.accuracy:.3f}  macro-F1 {rep.macro_f1:.3f}  "
          f"weighted-F1 {rep.weighted_f1:.3f}  (n={rep.n})")
    ti_path = _ckpt(args.run_dir, "textintent.ckpt")
    asr_path = _ckpt(args.run_dir, "asr.ckpt")
    if ti_path.exists() and asr_path.exists():
        asr = HctcModel.load(asr_path)
        text_model = TextIntentModel.load(ti_path)
        lm_path = Path(args.run_dir) / "lm.arpa"
        lm = NgramLm.load_arpa(lm_path) if lm_path.exists() else None
        rep2, _, _ = training.evaluate_pipeline(asr, text_model, records,
                                                store, N_INTENTS, cfg.decode, lm)
        print(f"cascade:  acc {rep2.accuracy:.3f}  macro-F1 {rep2.macro_f1:.3f}  "
              f"weighted-F1 {rep2.weighted_f1:.3f}  (n={rep2.n})")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    records = by_split(load_manifest(args.root), args.split)[:args.n_utts]
    store = FeatureStore(args.root, cfg.features)
    feats = [store.features(r) for r in records]
    s2i = S2IModel.load(_latest_s2i(args.run_dir))
    asr = HctcModel.load(_ckpt(args.run_dir, "asr.ckpt"))
    text_model = TextIntentModel.load(_ckpt(args.run_dir, "textintent.ckpt"))
    lm_path = Path(args.run_dir) / "lm.arpa"
    lm = NgramLm.load_arpa(lm_path) if lm_path.exists() else None
    out = bench.bench_paths(s2i, asr, text_model, feats, cfg.decode, lm,
                            reps=args.reps)
    for name, r in out.items():
        print(f"{name}: mean {r.mean_ms:.1f} ms  p50 {r.p50_ms:.1f}  "
              f"p95 {r.p95_ms:.1f}  ({r.qps:.1f}/s)")
        for stage, ms in r.stage_ms.items():
            print(f"    {stage}: {ms:.1f} ms")
    return 0


def cmd_run_plan(args) -> int:
    cfg = _load_config(args)
    plan = ExperimentPlan(seed=args.seed, corpus_seed=args.seed)
    summary = run_experiment(args.root, args.run_dir, cfg, plan)
    print(json.dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="s2i",
        description="spoken-command recognition and intent tooling")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, root=True, run=True):
        sp.add_argument("--config", default=None, help="YAML config overrides")
        sp.add_argument("--seed", type=int, default=0)
        if root:
            sp.add_argument("--root", required=True, help="corpus directory")
        if run:
            sp.add_argument("--run-dir", required=True)

    sp = sub.add_parser("datagen", help="generate the synthetic corpus")
    common(sp, run=False)
    sp.set_defaults(fn=cmd_datagen)

    sp = sub.add_parser("featurize", help="front-end a WAV file")
    common(sp, root=False, run=False)
    sp.add_argument("--wav", required=True)
    sp.add_argument("--out", default=None, help="save features as .npy")
    sp.set_defaults(fn=cmd_featurize)

    sp = sub.add_parser("train-asr", help="train the recognizer")
    common(sp)
    sp.set_defaults(fn=cmd_train_asr)

    sp = sub.add_parser("train-s2i", help="fine-tune the intent model")
    common(sp)
    sp.add_argument("--split", default="v1_train")
    sp.add_argument("--epochs", type=int, default=None)
    sp.add_argument("--scratch", action="store_true",
                    help="skip the pretrained trunk")
    sp.add_argument("--out-name", default="s2i_v1.ckpt")
    sp.set_defaults(fn=cmd_train_s2i)

    sp = sub.add_parser("decode", help="transcribe a split and report WER")
    common(sp)
    sp.add_argument("--split", default="test")
    sp.add_argument("--level", type=int, default=-1)
    sp.add_argument("--no-lm", action="store_true")
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_decode)

    sp = sub.add_parser("predict", help="intent for a single WAV")
    common(sp, root=False)
    sp.add_argument("--wav", required=True)
    sp.add_argument("--pipeline", action="store_true",
                    help="use the transcribe-then-classify path")
    sp.set_defaults(fn=cmd_predict)

    sp = sub.add_parser("al-select", help="pick utterances to label next")
    common(sp)
    sp.add_argument("--split", default="pool")
    sp.add_argument("--k", type=int, default=40)
    sp.set_defaults(fn=cmd_al_select)

    sp = sub.add_parser("pseudo-label", help="self-label confident utterances")
    common(sp)
    sp.add_argument("--split", default="pool")
    sp.add_argument("--min-conf", type=float, default=0.9)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_pseudo_label)

    sp = sub.add_parser("evaluate", help="score intent predictions")
    common(sp)
    sp.add_argument("--split", default="test")
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("bench", help="latency of both prediction paths")
    common(sp)
    sp.add_argument("--split", default="test")
    sp.add_argument("--n-utts", type=int, default=10)
    sp.add_argument("--reps", type=int, default=30)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("run-plan", help="full experiment in one go")
    common(sp)
    sp.set_defaults(fn=cmd_run_plan)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
