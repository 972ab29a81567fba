"""Audio container and 16-bit PCM WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

DEFAULT_SAMPLE_RATE = 16000


@dataclass
class AudioBuffer:
    """Mono audio as float samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InputError("audio must be a 1-D sample array")
        if self.sample_rate_hz <= 0:
            raise InputError("sample_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def validate(self) -> None:
        if len(self.samples) == 0:
            raise InputError("empty audio buffer")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("audio contains non-finite samples")


def write_wav(path: str | Path, audio: AudioBuffer) -> None:
    """Write mono 16-bit PCM. Samples are clipped to [-1, 1] first."""
    clipped = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate_hz)
        w.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> AudioBuffer:
    """Read mono 16-bit PCM into float samples in [-1, 1]."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise InputError(f"{path}: expected mono audio, got {w.getnchannels()} channels")
        if w.getsampwidth() != 2:
            raise InputError(f"{path}: expected 16-bit PCM, got {8 * w.getsampwidth()}-bit")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float64) / 32767.0, rate)


def decimate(audio: AudioBuffer, factor: int) -> AudioBuffer:
    """Integer-factor decimation (picks every factor-th sample).

    The synthetic corpus is band-limited well below the decimated Nyquist
    rate, so no anti-alias filter is applied.
    """
    if factor < 1 or audio.sample_rate_hz % factor != 0:
        raise InputError("decimation factor must divide the sample rate")
    return AudioBuffer(audio.samples[::factor].copy(), audio.sample_rate_hz // factor)
