"""Log-mel front end: framing, mel filterbank, frame stacking, masking.

The acoustic models consume stacked log-mel frames: 80 mel bins per 20 ms
window at a 10 ms hop, then 5 consecutive frames concatenated with a
stride of 3.  Under the defaults that yields 400-dim vectors covering a
60 ms receptive field every 30 ms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .config import FeatureConfig
from .errors import ShortUtteranceError

__all__ = [
    "FeatureMatrix",
    "mel_filterbank",
    "mel_center_frequencies",
    "log_mel",
    "stack_frames",
    "apply_masking",
    "featurize",
]


@dataclass
class FeatureMatrix:
    """Stacked feature sequence plus its time geometry."""

    frames: np.ndarray            # (T', D)
    frame_stride_ms: float
    receptive_field_ms: float

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int, sample_rate_hz: int) -> np.ndarray:
    """Center frequency in Hz of each triangular mel filter."""
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate_hz / 2.0), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(n_mels: int, fft_size: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filterbank over the rfft bins, shape (n_mels, fft_size//2+1).

    Triangles are evaluated at the continuous bin frequencies rather than
    snapped to integer bins, so every filter has nonzero support.
    """
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate_hz / 2.0), n_mels + 2))
    bin_freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate_hz)

    fb = np.zeros((n_mels, len(bin_freqs)))
    for m in range(n_mels):
        left, center, right = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_freqs - left) / max(center - left, 1e-12)
        down = (right - bin_freqs) / max(right - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def log_mel(audio: AudioBuffer, cfg: FeatureConfig) -> np.ndarray:
    """Log mel-spectrogram, shape (T, n_mels).

    Hann-windowed frames, power spectrum, triangular mel projection,
    natural log after flooring at cfg.log_floor.
    """
    audio.validate()
    win = cfg.window_samples(audio.sample_rate_hz)
    hop = cfg.hop_samples(audio.sample_rate_hz)
    x = audio.samples
    if len(x) < win:
        raise ShortUtteranceError()

    n_frames = 1 + (len(x) - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hanning(win)[None, :]

    power = np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1)) ** 2
    fb = mel_filterbank(cfg.n_mels, cfg.fft_size, audio.sample_rate_hz)
    mel = power @ fb.T
    out = np.log(np.maximum(mel, cfg.log_floor))
    if cfg.normalize:
        out = (out - out.mean()) / (out.std() + 1e-8)
    return out


def stack_frames(mel: np.ndarray, stack: int, stride: int, hop_ms: float = 10.0,
                 window_ms: float = 20.0) -> FeatureMatrix:
    """Concatenate `stack` consecutive rows every `stride` rows."""
    T, d = mel.shape
    if T < stack:
        raise ShortUtteranceError()
    n_out = 1 + (T - stack) // stride
    starts = stride * np.arange(n_out)
    rows = np.concatenate([mel[starts + k] for k in range(stack)], axis=1)
    return FeatureMatrix(
        frames=rows,
        frame_stride_ms=hop_ms * stride,
        receptive_field_ms=window_ms + (stack - 1) * hop_ms,
    )


def apply_masking(f: FeatureMatrix, n_time_masks: int, max_time_width: int,
                  n_freq_masks: int, max_freq_width: int, seed: int) -> FeatureMatrix:
    """Replace random time ranges and feature-dim ranges with the utterance mean.

    Deterministic for a fixed seed; shape is always preserved and widths
    that overrun the matrix are clamped.
    """
    rng = np.random.default_rng(seed)
    out = f.frames.copy()
    fill = float(f.frames.mean())
    T, D = out.shape

    for _ in range(n_time_masks):
        w = min(int(rng.integers(0, max_time_width + 1)), T)
        t0 = int(rng.integers(0, max(T - w, 0) + 1))
        out[t0:t0 + w, :] = fill
    for _ in range(n_freq_masks):
        w = min(int(rng.integers(0, max_freq_width + 1)), D)
        d0 = int(rng.integers(0, max(D - w, 0) + 1))
        out[:, d0:d0 + w] = fill
    return FeatureMatrix(out, f.frame_stride_ms, f.receptive_field_ms)


def featurize(audio: AudioBuffer, cfg: FeatureConfig) -> FeatureMatrix:
    """Full front end: log-mel then stacking."""
    mel = log_mel(audio, cfg)
    return stack_frames(mel, cfg.stack, cfg.stack_stride, cfg.hop_ms, cfg.window_ms)
