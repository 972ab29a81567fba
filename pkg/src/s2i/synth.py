"""Synthetic spoken-command corpus with controllable difficulty.

Each letter is a tone held for roughly letter_ms, with short silences
between letters and longer ones between words.  The 26 letter
frequencies sit at equal mel intervals between 500 and 3500 Hz, so
neighbouring letters are acoustically close but still resolvable by an
80-bin mel front end.  Per-utterance speaking-rate and pitch jitter
(plus a small per-letter detune) stand in for speaker variation: the
same transcript never renders twice the same way, but the jitters stay
below half the letter spacing, so the intended letters remain the
nearest ones.

The lexicon splits into two halves that stand in for two languages:
words starting a-l render as pure tones (family "a"), words starting
m-z add a second harmonic and a slight upward chirp (family "b").
Phrases drawing words from both halves are tagged "mixed"; that is the
code-mixing case the transliteration side of the system exists for.

Twenty-six command keywords (initials a through z) map to intents 0-25.
Intent 26 ("others") covers carrier-only phrases and confusable twins:
each keyword with its middle letter moved to the neighbouring tone, one
step from a real command and rendered with the same recipe family.
Intent 27 ("blank") is silence with an empty transcript.

Everything is generated from explicit seeds; the same seed produces the
same WAV bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, write_wav
from .config import SynthConfig
from .data import ManifestRecord, save_manifest
from .errors import InputError
from .features import _hz_to_mel, _mel_to_hz

LETTERS = "abcdefghijklmnopqrstuvwxyz"

KEYWORDS = [
    "alarm", "brew", "call", "dim", "eject", "fan", "grind", "heat",
    "input", "jazz", "kettle", "light", "mute", "next", "open", "pause",
    "quiet", "radio", "stop", "timer", "undo", "volume", "wake", "xray",
    "yield", "zoom",
]

OTHERS_INTENT = 26
BLANK_INTENT = 27
N_INTENTS = 28

INTENT_NAMES = KEYWORDS + ["others", "blank"]

# Carrier words, two per lexicon half.
CARRIERS_A = ["hey", "go"]
CARRIERS_B = ["please", "now"]
CARRIERS = CARRIERS_A + CARRIERS_B

LOW_HZ = 500.0
HIGH_HZ = 3500.0


def letter_hz(ch: str) -> float:
    """Letter tone frequency: 26 points equally spaced on the mel scale."""
    idx = LETTERS.index(ch)
    lo, hi = _hz_to_mel(LOW_HZ), _hz_to_mel(HIGH_HZ)
    return float(_mel_to_hz(lo + idx * (hi - lo) / (len(LETTERS) - 1)))


def word_family(word: str) -> str:
    """Which lexicon half a word belongs to, keyed on its first letter."""
    return "a" if word[0] <= "l" else "b"


def utterance_family(text: str) -> str:
    """"a", "b", "mixed", or "" for an empty transcript."""
    fams = {word_family(w) for w in text.split()}
    if not fams:
        return ""
    return fams.pop() if len(fams) == 1 else "mixed"


def twin_word(word: str) -> str:
    """Shift the middle letter to the neighbouring tone.

    The initial stays put, so a twin keeps its keyword's recipe family
    while sounding one step away from the real command.
    """
    pos = len(word) // 2
    idx = LETTERS.index(word[pos])
    idx = idx - 1 if idx == len(LETTERS) - 1 else idx + 1
    return word[:pos] + LETTERS[idx] + word[pos + 1:]


TWINS = [twin_word(w) for w in KEYWORDS]


def intent_of_text(text: str) -> int:
    """Ground-truth routing rule: first keyword wins, none means others."""
    if not text:
        return BLANK_INTENT
    words = text.split()
    for w in words:
        if w in KEYWORDS:
            return KEYWORDS.index(w)
    return OTHERS_INTENT


# -- waveform rendering -------------------------------------------------


def _envelope(n: int, sr: int, edge_ms: float = 5.0) -> np.ndarray:
    edge = min(int(sr * edge_ms / 1000), n // 2)
    env = np.ones(n)
    if edge > 0:
        ramp = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, edge)))
        env[:edge] = ramp
        env[-edge:] = ramp[::-1]
    return env


def _letter_tone(ch: str, family: str, cfg: SynthConfig,
                 rate: float = 1.0, mel_shift: float = 0.0) -> np.ndarray:
    sr = cfg.sample_rate_hz
    n = int(sr * cfg.letter_ms * rate / 1000)
    t = np.arange(n) / sr
    f = float(_mel_to_hz(_hz_to_mel(letter_hz(ch)) + mel_shift))
    if family == "a":
        wave = np.sin(2.0 * np.pi * f * t)
    elif family == "b":
        # 2% upward chirp plus a second harmonic
        dur = n / sr
        phase = 2.0 * np.pi * f * (t + 0.02 * t * t / (2.0 * dur))
        wave = 0.72 * np.sin(phase) + 0.28 * np.sin(4.0 * np.pi * f * t)
    else:
        raise InputError(f"unknown family {family!r}")
    return wave * _envelope(n, sr)


def render_utterance(text: str, cfg: SynthConfig,
                     rng: np.random.Generator) -> AudioBuffer:
    """Tone sequence for the text, with margins and floor noise.

    Each word renders in its own lexicon half's recipe, so code-mixed
    phrases switch timbre mid-utterance.  An empty text is margins only.

    Every call draws one speaking rate and one pitch offset for the
    whole utterance, plus a small per-letter detune, so repeated renders
    of the same text differ the way repeated takes of a speaker would.
    """
    sr = cfg.sample_rate_hz
    rate = 1.0 + cfg.rate_jitter * float(rng.uniform(-1.0, 1.0))
    pitch = cfg.pitch_jitter_mel * float(rng.uniform(-1.0, 1.0))
    margin = np.zeros(int(sr * cfg.margin_ms / 1000))
    word_gap = np.zeros(int(sr * cfg.gap_ms * rate / 1000))
    letter_gap = np.zeros(int(sr * cfg.letter_gap_ms * rate / 1000))
    parts = [margin]
    for wi, word in enumerate(text.split()):
        fam = word_family(word)
        if wi > 0:
            parts.append(word_gap)
        for li, ch in enumerate(word):
            if li > 0:
                parts.append(letter_gap)
            shift = pitch + cfg.letter_jitter_mel * float(rng.uniform(-1.0, 1.0))
            parts.append(cfg.amplitude * _letter_tone(ch, fam, cfg, rate, shift))
    parts.append(margin)
    samples = np.concatenate(parts)
    samples = samples + cfg.noise_floor * rng.standard_normal(len(samples))
    return AudioBuffer(samples, sr)


def add_noise(buf: AudioBuffer, snr_db: float | None,
              rng: np.random.Generator) -> AudioBuffer:
    if snr_db is None:
        return buf
    power = float(np.mean(buf.samples ** 2))
    if power == 0.0:
        power = 1e-12
    noise_power = power / (10.0 ** (snr_db / 10.0))
    noise = np.sqrt(noise_power) * rng.standard_normal(len(buf.samples))
    return AudioBuffer(buf.samples + noise, buf.sample_rate_hz)


def render_at_level(text: str, level: int, cfg: SynthConfig,
                    seed: int) -> AudioBuffer:
    """Deterministic render: the seed fixes floor noise and additive noise."""
    if not 0 <= level < len(cfg.snr_db_by_level):
        raise InputError(f"noise level {level} out of range")
    rng = np.random.default_rng(np.random.SeedSequence([seed, level]))
    buf = render_utterance(text, cfg, rng)
    return add_noise(buf, cfg.snr_db_by_level[level], rng)


# -- corpus assembly ----------------------------------------------------


@dataclass
class CorpusSizes:
    """How many utterances land in each split."""

    asr_per_keyword: int = 4
    asr_others: int = 50
    asr_random_words: int = 50
    asr_blank: int = 6
    v1_per_intent: int = 3
    v2_per_intent: int = 8
    pool_size: int = 140
    test_per_intent: int = 4
    train_noise_levels: tuple = (0, 0, 1)
    pool_noise_levels: tuple = (0, 1, 2)
    test_noise_level: int = 0

    @classmethod
    def balanced(cls, n: int) -> "CorpusSizes":
        """Sizes that give every intent close to n/28 records overall,
        counting by the intent derivable from each transcript."""
        q = max(2, n // N_INTENTS)
        a = max(1, round(0.35 * q))
        v1 = max(1, round(0.10 * q))
        v2 = max(1, round(0.20 * q))
        t = max(1, round(0.15 * q))
        pool_each = max(0, q - a - v1 - v2 - t)
        return cls(
            asr_per_keyword=a,
            asr_others=(a + 1) // 2,
            asr_random_words=a // 2,
            asr_blank=a,
            v1_per_intent=v1,
            v2_per_intent=v2,
            pool_size=pool_each * N_INTENTS,
            test_per_intent=t,
        )


def _keyword_text(intent: int, variant: int) -> str:
    kw = KEYWORDS[intent]
    forms = [kw, f"{kw} please", f"please {kw}", f"hey {kw}", f"{kw} now"]
    return forms[variant % len(forms)]


def _others_text(variant: int) -> str:
    forms = [t for t in TWINS]
    forms += [f"{t} please" for t in TWINS]
    forms += ["please", "hey go", "now please", "go", "hey", "now"]
    return forms[variant % len(forms)]


def _intent_text(intent: int, variant: int) -> str:
    if intent == BLANK_INTENT:
        return ""
    if intent == OTHERS_INTENT:
        return _others_text(variant)
    return _keyword_text(intent, variant)


def _random_word(rng: np.random.Generator) -> str:
    while True:
        n = int(rng.integers(3, 7))
        w = "".join(LETTERS[int(i)] for i in rng.integers(0, 26, size=n))
        if w not in KEYWORDS:
            return w


def training_texts(sizes: CorpusSizes | None = None, seed: int = 0) -> list[str]:
    """Text-only view of the corpus, for vocabularies and language models."""
    sizes = sizes or CorpusSizes()
    rng = np.random.default_rng(seed)
    texts = []
    for intent in range(len(KEYWORDS)):
        for v in range(5):
            texts.append(_keyword_text(intent, v))
    for v in range(2 * len(TWINS) + 6):
        texts.append(_others_text(v))
    for _ in range(sizes.asr_random_words):
        texts.append(" ".join(_random_word(rng)
                              for _ in range(int(rng.integers(1, 3)))))
    return texts


class CorpusWriter:
    def __init__(self, root: Path, cfg: SynthConfig, seed: int):
        self.root = Path(root)
        self.cfg = cfg
        self.seed = seed
        self.records: list[ManifestRecord] = []
        (self.root / "wavs").mkdir(parents=True, exist_ok=True)

    def add(self, split: str, text: str, intent: int | None,
            level: int, upsample: int = 1) -> ManifestRecord:
        idx = len(self.records)
        utt_id = f"u{idx:05d}"
        utt_seed = int(np.random.SeedSequence([self.seed, idx]).generate_state(1)[0])
        buf = render_at_level(text, level, self.cfg, utt_seed)
        rel = f"wavs/{utt_id}.wav"
        write_wav(self.root / rel, buf)
        rec = ManifestRecord(utt_id, split, rel, text, intent,
                             utterance_family(text), level,
                             round(buf.duration_s, 6), upsample)
        self.records.append(rec)
        return rec

    def finish(self) -> Path:
        path = self.root / "manifest.jsonl"
        save_manifest(path, self.records)
        return path


def generate_corpus(root: str | Path, cfg: SynthConfig | None = None,
                    sizes: CorpusSizes | None = None, seed: int = 0) -> Path:
    """Write WAVs and a manifest covering every split the tooling needs.

    Splits: asr_train (transcribed, intent left null), v1_train and
    v2_extra (intent-labeled), pool (candidates for selection), test.
    The v1 split deliberately leans clean and single-keyword, so the
    noisier, code-mixed pool has something new to offer.
    """
    cfg = cfg or SynthConfig()
    sizes = sizes or CorpusSizes()
    rng = np.random.default_rng(seed)
    w = CorpusWriter(root, cfg, seed)

    # transcribed speech for the recognizer: keywords, twins, random
    # words, and a little silence so every head sees empty targets
    for intent in range(len(KEYWORDS)):
        for v in range(sizes.asr_per_keyword):
            lvl = sizes.train_noise_levels[v % len(sizes.train_noise_levels)]
            w.add("asr_train", _keyword_text(intent, v), None, lvl)
    for v in range(sizes.asr_others):
        lvl = sizes.train_noise_levels[v % len(sizes.train_noise_levels)]
        w.add("asr_train", _others_text(v), None, lvl)
    for v in range(sizes.asr_random_words):
        text = " ".join(_random_word(rng) for _ in range(int(rng.integers(1, 3))))
        lvl = sizes.train_noise_levels[v % len(sizes.train_noise_levels)]
        w.add("asr_train", text, None, lvl)
    for v in range(sizes.asr_blank):
        w.add("asr_train", "", None,
              sizes.train_noise_levels[v % len(sizes.train_noise_levels)])

    # intent-labeled: v1 follows the (mostly clean) training noise mix
    for intent in range(N_INTENTS):
        for v in range(sizes.v1_per_intent):
            lvl = sizes.train_noise_levels[v % len(sizes.train_noise_levels)]
            w.add("v1_train", _intent_text(intent, v), intent, lvl)
    for intent in range(N_INTENTS):
        for v in range(sizes.v2_per_intent):
            lvl = sizes.train_noise_levels[v % len(sizes.train_noise_levels)]
            w.add("v2_extra", _intent_text(intent, v + 1), intent, lvl)

    # unlabeled pool: noisier, more varied phrasing
    for v in range(sizes.pool_size):
        intent = int(rng.integers(0, N_INTENTS))
        lvl = sizes.pool_noise_levels[v % len(sizes.pool_noise_levels)]
        w.add("pool", _intent_text(intent, v), intent, lvl)

    for intent in range(N_INTENTS):
        for v in range(sizes.test_per_intent):
            w.add("test", _intent_text(intent, v + 2), intent,
                  sizes.test_noise_level)

    return w.finish()
