"""End-to-end experiment driver with an append-only metrics ledger.

A run directory collects everything one experiment produces: text
artifacts (vocabularies, language model), checkpoints for each phase,
a JSONL ledger of metrics, and a summary.  Phases build on each other:
recognizer pretraining, intent fine-tuning on the small labeled pot,
an optional from-scratch control, selection-based labeling, and
confidence-filtered self-labeling.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth, training
from .config import Config
from .data import FeatureStore, by_split, load_manifest
from .models import HctcModel, S2IModel
from .ngram import NgramLm, train_ngram
from .subwords import SubwordVocab, build_vocab
from .synth import BLANK_INTENT, CorpusSizes, N_INTENTS, OTHERS_INTENT
from .textintent import TextIntentModel, TfidfVocab


@dataclass
class ExperimentPlan:
    seed: int = 0
    corpus_seed: int = 0
    generate: bool = True
    scratch_control: bool = True
    active_learning: bool = True
    pseudo_labeling: bool = True
    al_budget: int = 40
    sizes: CorpusSizes = field(default_factory=CorpusSizes)


class MetricsLedger:
    """One JSON object per line, never rewritten."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def log(self, phase: str, **values) -> None:
        entry = {"phase": phase, "ts": round(time.time(), 3)}
        for k, v in values.items():
            entry[k] = round(v, 6) if isinstance(v, float) else v
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")

    def read(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in
                self.path.read_text(encoding="utf-8").splitlines() if line]


def build_text_artifacts(texts: list[str], config: Config):
    """Vocabularies at the three granularities plus the rescoring LM."""
    vc = config.vocab
    vocabs = [
        build_vocab(texts, vc.char_size, "char", vc.max_piece_len,
                    vc.em_rounds, vc.frequency_fallback),
        build_vocab(texts, vc.short_size, "short", vc.max_piece_len,
                    vc.em_rounds, vc.frequency_fallback),
        build_vocab(texts, vc.long_size, "long", vc.max_piece_len,
                    vc.em_rounds, vc.frequency_fallback),
    ]
    long_vocab = vocabs[-1]
    id_corpus = [long_vocab.segment(t).ids for t in texts]
    lm = train_ngram(id_corpus, long_vocab.size, config.lm.order,
                     config.lm.discount)
    return vocabs, lm


def run_experiment(root: str | Path, run_dir: str | Path, config: Config,
                   plan: ExperimentPlan) -> dict:
    root = Path(root)
    run_dir = Path(run_dir)
    (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    ledger = MetricsLedger(run_dir / "metrics.jsonl")
    config.dump(run_dir / "config.yaml")
    rng = np.random.default_rng(plan.seed)
    summary: dict = {"plan_seed": plan.seed}

    if plan.generate:
        synth.generate_corpus(root, config.synth, plan.sizes, plan.corpus_seed)
        ledger.log("datagen", corpus_seed=plan.corpus_seed)
    records = load_manifest(root)
    store = FeatureStore(root, config.features)
    asr_train = by_split(records, "asr_train")
    v1 = by_split(records, "v1_train")
    pool = by_split(records, "pool")
    test = by_split(records, "test")

    # text artifacts
    vocabs, lm = build_text_artifacts([r.text for r in asr_train], config)
    for v in vocabs:
        v.save(run_dir / f"vocab_{v.level}.txt")
    lm.save_arpa(run_dir / "lm.arpa")
    ledger.log("text_artifacts",
               vocab_sizes=[v.size for v in vocabs],
               lm_ngrams=sum(len(t) == lm.order for t in lm.probs))

    # recognizer pretraining
    input_dim = config.features.stacked_dim
    asr = HctcModel(config.model, input_dim, vocabs, rng)
    hist = training.train_asr(asr, asr_train, store, config.training, plan.seed)
    for h in hist:
        ledger.log("asr_train", epoch=h.epoch, loss=h.loss,
                   utterances=h.n_utterances, skipped=h.skipped)
    asr.save(run_dir / "checkpoints" / "asr.ckpt")
    wer_rep = training.asr_wer(asr, test, store, config.decode, lm)
    ledger.log("asr_eval", wer=wer_rep.wer, ref_words=wer_rep.ref_words)
    summary["asr_wer"] = wer_rep.wer

    # intent model on the pretrained trunk
    s2i = S2IModel(asr, N_INTENTS, rng)
    for h in training.finetune_s2i(s2i, v1, store, config.training, plan.seed,
                                   config.training.v1_epochs):
        ledger.log("s2i_v1", epoch=h.epoch, loss=h.loss)
    s2i.save(run_dir / "checkpoints" / "s2i_v1.ckpt")
    rep_v1, _, _ = training.evaluate_s2i(s2i, test, store, N_INTENTS)
    ledger.log("s2i_v1_eval", macro_f1=rep_v1.macro_f1,
               accuracy=rep_v1.accuracy)
    summary["v1_macro_f1"] = rep_v1.macro_f1

    if plan.scratch_control:
        fresh_trunk = HctcModel(config.model, input_dim, vocabs,
                                np.random.default_rng(plan.seed + 1))
        scratch = S2IModel(fresh_trunk, N_INTENTS,
                           np.random.default_rng(plan.seed + 1))
        training.finetune_s2i(scratch, v1, store, config.training, plan.seed,
                              config.training.v1_epochs)
        rep_sc, _, _ = training.evaluate_s2i(scratch, test, store, N_INTENTS)
        ledger.log("s2i_scratch_eval", macro_f1=rep_sc.macro_f1,
                   accuracy=rep_sc.accuracy)
        summary["scratch_macro_f1"] = rep_sc.macro_f1

    # grow the labeled set and keep training the same model
    labeled = list(v1)
    if plan.active_learning and pool:
        picked = training.select_low_confidence(
            s2i, pool, store, config.training.al_mode,
            k=plan.al_budget, threshold=config.training.al_threshold,
            seed=plan.seed)
        labeled = labeled + picked
        ledger.log("al_select", picked=len(picked))
        summary["al_picked"] = len(picked)
    for h in training.finetune_s2i(s2i, labeled, store, config.training,
                                   plan.seed + 2, config.training.v2_epochs):
        ledger.log("s2i_v2", epoch=h.epoch, loss=h.loss)
    s2i.save(run_dir / "checkpoints" / "s2i_v2.ckpt")
    rep_v2, _, _ = training.evaluate_s2i(s2i, test, store, N_INTENTS)
    ledger.log("s2i_v2_eval", macro_f1=rep_v2.macro_f1,
               accuracy=rep_v2.accuracy)
    summary["v2_macro_f1"] = rep_v2.macro_f1

    if plan.pseudo_labeling and pool:
        chosen = {r.utt_id for r in labeled}
        rest = [r for r in pool if r.utt_id not in chosen]
        pseudo = training.pseudo_label(s2i, rest, store,
                                       config.training.pseudo_min_confidence)
        ledger.log("pseudo_label", kept=len(pseudo), candidates=len(rest))
        if pseudo:
            training.finetune_s2i(s2i, labeled + pseudo, store, config.training,
                                  plan.seed + 3, config.training.pseudo_epochs)
            rep_ps, _, _ = training.evaluate_s2i(s2i, test, store, N_INTENTS)
            ledger.log("s2i_pseudo_eval", macro_f1=rep_ps.macro_f1,
                       accuracy=rep_ps.accuracy)
            summary["pseudo_macro_f1"] = rep_ps.macro_f1
    s2i.save(run_dir / "checkpoints" / "s2i_final.ckpt")

    # cascade baseline artifacts; intent fine-tuning touched the live
    # trunk, so the pipeline recognizer reloads the pretrained weights
    asr = HctcModel.load(run_dir / "checkpoints" / "asr.ckpt")
    labeled_texts = [r.text for r in labeled]
    labeled_intents = [int(r.intent) for r in labeled]
    tvocab = TfidfVocab.fit([t for t in labeled_texts if t])
    text_model = TextIntentModel(tvocab, N_INTENTS, BLANK_INTENT,
                                 np.random.default_rng(plan.seed))
    text_model.fit([t for t in labeled_texts],
                   labeled_intents)
    text_model.save(run_dir / "checkpoints" / "textintent.ckpt")
    rep_pipe, _, _ = training.evaluate_pipeline(
        asr, text_model, test, store, N_INTENTS, config.decode, lm)
    ledger.log("pipeline_eval", macro_f1=rep_pipe.macro_f1,
               accuracy=rep_pipe.accuracy)
    summary["pipeline_macro_f1"] = rep_pipe.macro_f1

    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return summary


def load_run(run_dir: str | Path):
    """Reload the artifacts run_experiment leaves behind."""
    run_dir = Path(run_dir)
    asr = HctcModel.load(run_dir / "checkpoints" / "asr.ckpt")
    s2i = S2IModel.load(run_dir / "checkpoints" / "s2i_final.ckpt")
    text_model = TextIntentModel.load(run_dir / "checkpoints" / "textintent.ckpt")
    lm = NgramLm.load_arpa(run_dir / "lm.arpa")
    return asr, s2i, text_model, lm
