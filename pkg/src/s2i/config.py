"""Centralized configuration for every subsystem.

All defaults are desk-scale: the models train in minutes on a laptop CPU
while keeping the 3-level trunk structure intact.  A single YAML file can
override any field; unknown keys are rejected so typos fail loudly.

YAML schema (all sections optional, all fields optional):

    features:  {window_ms, hop_ms, fft_size, n_mels, stack, stack_stride,
                log_floor, normalize, n_time_masks, max_time_width,
                n_freq_masks, max_freq_width}
    vocab:     {char_size, short_size, long_size, max_piece_len, em_rounds,
                frequency_fallback}
    lm:        {order, discount}
    model:     {hidden_dim, model_dim, n_heads, block_layers, pool,
                freeze_blocks}
    decode:    {beam_width, n_best, lm_alpha, length_beta, prune_top_k}
    training:  {asr_epochs, asr_lr_min, asr_lr_max, v1_epochs, v2_epochs,
                pseudo_epochs, s2i_lr, batch_audio_minutes,
                pseudo_min_confidence, al_mode, al_threshold}
    translit:  {model_dim, n_heads, ffn_dim, epochs, lr, max_len_factor}
    synth:     {sample_rate_hz, letter_ms, letter_gap_ms, gap_ms, margin_ms,
                amplitude, noise_floor, snr_db_by_level}
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class FeatureConfig:
    """Log-mel front end: 20 ms window / 10 ms hop, 80 mels, 5x3 stacking."""

    window_ms: float = 20.0
    hop_ms: float = 10.0
    fft_size: int = 512
    n_mels: int = 80
    stack: int = 5
    stack_stride: int = 3
    log_floor: float = 1e-10
    normalize: bool = True

    # Masking augmentation (train-time only).
    n_time_masks: int = 2
    max_time_width: int = 6
    n_freq_masks: int = 2
    max_freq_width: int = 10

    def window_samples(self, sample_rate_hz: int) -> int:
        return int(sample_rate_hz * self.window_ms / 1000)

    def hop_samples(self, sample_rate_hz: int) -> int:
        return int(sample_rate_hz * self.hop_ms / 1000)

    @property
    def stacked_dim(self) -> int:
        return self.n_mels * self.stack

    @property
    def frame_stride_ms(self) -> float:
        return self.hop_ms * self.stack_stride

    @property
    def receptive_field_ms(self) -> float:
        return self.window_ms + (self.stack - 1) * self.hop_ms

    def validate(self, sample_rate_hz: int = 16000) -> None:
        if self.fft_size < self.window_samples(sample_rate_hz):
            raise ConfigError("fft_size must cover one analysis window")
        if self.n_mels < 1 or self.stack < 1 or self.stack_stride < 1:
            raise ConfigError("n_mels, stack and stack_stride must be >= 1")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")


@dataclass
class VocabConfig:
    """Subword vocabulary sizes for the three granularities."""

    char_size: int = 30
    short_size: int = 100
    long_size: int = 300
    max_piece_len: int = 8
    em_rounds: int = 2
    frequency_fallback: bool = False

    def size_for(self, level: str) -> int:
        return {"char": self.char_size, "short": self.short_size, "long": self.long_size}[level]


@dataclass
class LmConfig:
    order: int = 3
    discount: float = 0.75


@dataclass
class ModelConfig:
    """3-block trunk, desk-scale widths."""

    hidden_dim: int = 64          # per direction
    model_dim: int = 128          # = 2 * hidden_dim, block output width
    n_heads: int = 4
    block_layers: tuple = (2, 2, 1)
    pool: str = "mha"             # "mha" | "time_average"
    freeze_blocks: int = 0        # fine-tuning: freeze the first k blocks

    def validate(self) -> None:
        if self.model_dim != 2 * self.hidden_dim:
            raise ConfigError("model_dim must equal 2 * hidden_dim")
        if self.model_dim % self.n_heads != 0:
            raise ConfigError("model_dim must be divisible by n_heads")
        if self.pool not in ("mha", "time_average"):
            raise ConfigError(f"unknown pool kind: {self.pool}")
        if len(self.block_layers) != 3:
            raise ConfigError("exactly three trunk blocks are required")


@dataclass
class DecodeConfig:
    beam_width: int = 64
    n_best: int = 100
    lm_alpha: float = 0.5
    length_beta: float = 0.0
    prune_top_k: int = 16         # per-frame candidate tokens; 0 = no pruning


@dataclass
class TrainingConfig:
    asr_epochs: int = 8
    asr_lr_min: float = 1e-4
    asr_lr_max: float = 1e-3
    v1_epochs: int = 10
    v2_epochs: int = 6
    pseudo_epochs: int = 2
    s2i_lr: float = 3e-4
    batch_audio_minutes: float = 0.5
    pseudo_min_confidence: float = 0.9
    al_mode: str = "bottom_k"     # "bottom_k" | "threshold"
    al_threshold: float = 0.8


@dataclass
class TranslitConfig:
    model_dim: int = 48
    n_heads: int = 2
    ffn_dim: int = 96
    epochs: int = 30
    lr: float = 1e-3
    max_len_factor: int = 4


@dataclass
class SynthConfig:
    """Waveform recipes for the synthetic corpus."""

    sample_rate_hz: int = 16000
    letter_ms: float = 60.0
    letter_gap_ms: float = 15.0   # intra-word silence between letters
    gap_ms: float = 90.0          # inter-word silence
    margin_ms: float = 80.0       # leading/trailing silence
    amplitude: float = 0.30
    noise_floor: float = 1e-4     # always-on mic noise
    # Per-utterance speaker variation.  Rate scales every duration by
    # 1 ± rate_jitter; pitch shifts the whole utterance on the mel axis.
    # Letter jitter perturbs each tone independently.  All three stay
    # well under half the 56-mel letter spacing, so the nearest-letter
    # reading of an utterance is never ambiguous.
    rate_jitter: float = 0.18
    pitch_jitter_mel: float = 18.0
    letter_jitter_mel: float = 5.0
    # Additive Gaussian noise SNR per integer noise level; level 0 is clean.
    snr_db_by_level: tuple = (None, 18.0, 12.0, 6.0, 2.0)


_SECTIONS = {
    "features": FeatureConfig,
    "vocab": VocabConfig,
    "lm": LmConfig,
    "model": ModelConfig,
    "decode": DecodeConfig,
    "training": TrainingConfig,
    "translit": TranslitConfig,
    "synth": SynthConfig,
}


@dataclass
class Config:
    """Top-level bundle read by the CLI and the experiment runner."""

    features: FeatureConfig = field(default_factory=FeatureConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    translit: TranslitConfig = field(default_factory=TranslitConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    @classmethod
    def load(cls, path: str | Path | None) -> "Config":
        """Build a Config from a YAML file layered over the defaults."""
        cfg = cls()
        if path is None:
            return cfg
        raw = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
        for section, values in raw.items():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section: {section!r}")
            if values is None:
                continue
            target = getattr(cfg, section)
            known = {f.name for f in fields(target)}
            for key, val in values.items():
                if key not in known:
                    raise ConfigError(f"unknown key {section}.{key!r}")
                if isinstance(getattr(target, key), tuple) and isinstance(val, list):
                    val = tuple(val)
                setattr(target, key, val)
        cfg.model.validate()
        cfg.features.validate(cfg.synth.sample_rate_hz)
        return cfg

    def dump(self, path: str | Path) -> None:
        data = {name: asdict(getattr(self, name)) for name in _SECTIONS}
        Path(path).write_text(yaml.safe_dump(data, sort_keys=False))
