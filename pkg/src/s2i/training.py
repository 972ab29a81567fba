"""Training loops and the data-selection strategies around them.

The recognizer trains all three heads jointly with equal weight and a
triangular learning-rate cycle; intent fine-tuning is plain constant-LR
cross entropy on top of whatever trunk it is handed (pretrained or
fresh).  All loops batch by audio duration rather than by count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import ctc, metrics
from .config import DecodeConfig, TrainingConfig
from .data import FeatureStore, ManifestRecord, duration_batches
from .errors import TrainingDivergedError
from .models import HctcModel, S2IModel
from .nn import tensor as tt
from .nn.optim import Adam, clip_grads, triangular_lr
from .pipeline import pipeline_predict
from .textintent import TextIntentModel


@dataclass
class EpochStats:
    epoch: int
    loss: float
    n_batches: int
    n_utterances: int
    skipped: int


def _aug_seed(seed: int, epoch: int, utt_id: str) -> int:
    return int(np.random.SeedSequence(
        [seed, epoch, abs(hash(utt_id)) % (2 ** 31)]).generate_state(1)[0])


def asr_targets(model: HctcModel, text: str) -> list[list[int]]:
    return [v.segment(text).ids for v in model.vocabs]


def train_asr(model: HctcModel, records: list[ManifestRecord],
              store: FeatureStore, cfg: TrainingConfig, seed: int = 0,
              epochs: int | None = None, augment: bool = True,
              clip_norm: float = 5.0) -> list[EpochStats]:
    """Joint CTC over the three heads; equal level weights.

    Raises TrainingDivergedError as soon as a batch loss stops being
    finite.  Utterances too short to admit their own targets are skipped
    and counted, not fatal.
    """
    epochs = epochs if epochs is not None else cfg.asr_epochs
    rng = np.random.default_rng(seed)
    params = [p for _, p in model.params()]
    opt = Adam(params)
    targets = {r.utt_id: asr_targets(model, r.text) for r in records}
    n_levels = len(model.vocabs)
    steps_per_epoch = max(1, len(duration_batches(
        records, cfg.batch_audio_minutes, np.random.default_rng(seed))))
    cycle = max(2, steps_per_epoch)  # one triangular period per epoch
    history = []
    step = 0
    for epoch in range(epochs):
        total_loss = 0.0
        n_batches = 0
        n_utts = 0
        skipped = 0
        for batch in duration_batches(records, cfg.batch_audio_minutes, rng):
            opt.zero_grad()
            batch_loss = 0.0
            used = 0
            for rec in batch:
                feats = (store.augmented(rec, _aug_seed(seed, epoch, rec.utt_id))
                         if augment else store.features(rec))
                t_frames = feats.shape[0]
                tgt = targets[rec.utt_id]
                if any(ctc.min_frames(t) > t_frames for t in tgt):
                    skipped += 1
                    continue
                logits = model.asr_forward(feats)
                loss = None
                for lv in range(n_levels):
                    lp = tt.log_softmax(logits[lv])
                    term = ctc.ctc_loss(lp, tgt[lv], model.vocabs[lv].blank_id)
                    loss = term if loss is None else tt.add(loss, term)
                loss = tt.mul(loss, 1.0 / (n_levels * len(batch)))
                loss.backward()
                batch_loss += float(loss.value)
                used += 1
            if used == 0:
                continue
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(step, f"batch loss {batch_loss}")
            clip_grads(params, clip_norm)
            lr = triangular_lr(step, cycle, cfg.asr_lr_min, cfg.asr_lr_max)
            opt.step(lr)
            step += 1
            total_loss += batch_loss
            n_batches += 1
            n_utts += used
        history.append(EpochStats(epoch, total_loss / max(n_batches, 1),
                                  n_batches, n_utts, skipped))
    return history


def asr_wer(model: HctcModel, records: list[ManifestRecord],
            store: FeatureStore, decode: DecodeConfig | None = None,
            lm=None, level: int = -1, greedy: bool = False) -> metrics.WerReport:
    refs, hyps = [], []
    for rec in records:
        feats = store.features(rec)
        if greedy:
            hyp = model.greedy_transcribe(feats, level)
        else:
            hyp = model.transcribe(feats, decode, lm, level).text
        refs.append(rec.text)
        hyps.append(hyp)
    return metrics.wer(refs, hyps)


def finetune_s2i(model: S2IModel, records: list[ManifestRecord],
                 store: FeatureStore, cfg: TrainingConfig, seed: int = 0,
                 epochs: int | None = None, lr: float | None = None,
                 augment: bool = True, clip_norm: float = 5.0) -> list[EpochStats]:
    """Cross-entropy fine-tuning of the intent head plus whatever trunk
    parameters are not frozen."""
    epochs = epochs if epochs is not None else cfg.v1_epochs
    lr = lr if lr is not None else cfg.s2i_lr
    rng = np.random.default_rng(seed)
    params = [p for _, p in model.params() if p.requires_grad]
    opt = Adam(params)
    history = []
    step = 0
    for epoch in range(epochs):
        total_loss = 0.0
        n_batches = 0
        n_utts = 0
        for batch in duration_batches(records, cfg.batch_audio_minutes, rng):
            opt.zero_grad()
            batch_loss = 0.0
            for rec in batch:
                feats = (store.augmented(rec, _aug_seed(seed, epoch, rec.utt_id))
                         if augment else store.features(rec))
                logits = model.forward(feats)
                loss = tt.cross_entropy(logits, [int(rec.intent)])
                loss = tt.mul(loss, 1.0 / len(batch))
                loss.backward()
                batch_loss += float(loss.value)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(step, f"batch loss {batch_loss}")
            clip_grads(params, clip_norm)
            opt.step(lr)
            step += 1
            total_loss += batch_loss
            n_batches += 1
            n_utts += len(batch)
        history.append(EpochStats(epoch, total_loss / max(n_batches, 1),
                                  n_batches, n_utts, 0))
    return history


def evaluate_s2i(model: S2IModel, records: list[ManifestRecord],
                 store: FeatureStore, n_classes: int,
                 exclude: set | None = None):
    gold, pred, conf = [], [], []
    for rec in records:
        intent, c = model.predict(store.features(rec))
        gold.append(int(rec.intent))
        pred.append(intent)
        conf.append(c)
    report = metrics.intent_metrics(gold, pred, n_classes, exclude)
    return report, pred, conf


def evaluate_pipeline(asr: HctcModel, text_model: TextIntentModel,
                      records: list[ManifestRecord], store: FeatureStore,
                      n_classes: int, decode: DecodeConfig | None = None,
                      lm=None, exclude: set | None = None):
    gold, pred, texts = [], [], []
    for rec in records:
        res = pipeline_predict(store.features(rec), asr, text_model, decode, lm)
        gold.append(int(rec.intent))
        pred.append(res.intent)
        texts.append(res.transcript)
    report = metrics.intent_metrics(gold, pred, n_classes, exclude)
    return report, pred, texts


def select_low_confidence(model: S2IModel, pool: list[ManifestRecord],
                          store: FeatureStore, mode: str = "bottom_k",
                          k: int = 0, threshold: float = 0.8,
                          seed: int = 0) -> list[ManifestRecord]:
    """Pick k pool items the model is least sure about.

    bottom_k takes the k lowest-confidence items, breaking confidence
    ties with a seeded shuffle, so a model that is uniformly unsure
    degenerates to seeded random sampling.  threshold restricts to
    items under the cutoff first and then random-samples k of them.
    Asking for more items than are available returns everything and
    warns.
    """
    rng = np.random.default_rng(seed)
    scored = []
    for rec in pool:
        _, conf = model.predict(store.features(rec))
        scored.append((conf, rec))
    order = rng.permutation(len(scored))
    scored = [scored[i] for i in order]
    scored.sort(key=lambda x: x[0])  # stable sort keeps ties shuffled
    if mode == "bottom_k":
        candidates = [rec for _, rec in scored]
    elif mode == "threshold":
        candidates = [rec for conf, rec in scored if conf < threshold]
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    if k >= len(candidates):
        if k > len(candidates):
            warnings.warn(f"requested {k} items but only "
                          f"{len(candidates)} qualify; returning all")
        return candidates
    if mode == "bottom_k":
        return candidates[:k]
    picked = rng.choice(len(candidates), size=k, replace=False)
    return [candidates[i] for i in sorted(picked)]


def pseudo_label(model: S2IModel, records: list[ManifestRecord],
                 store: FeatureStore,
                 min_confidence: float = 0.9) -> list[ManifestRecord]:
    """Self-label records the model is confident about; the rest drop out."""
    out = []
    for rec in records:
        intent, conf = model.predict(store.features(rec))
        if conf >= min_confidence:
            out.append(ManifestRecord(rec.utt_id, "pseudo", rec.wav, rec.text,
                                      intent, rec.family, rec.noise_level,
                                      rec.duration_s))
    return out
