"""Manifest records, cached features, and duration-aware batching."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import read_wav
from .config import FeatureConfig
from .errors import InputError
from .features import apply_masking, featurize


@dataclass
class ManifestRecord:
    utt_id: str
    split: str
    wav: str
    text: str
    intent: int | None
    family: str
    noise_level: int
    duration_s: float
    upsample_factor: int = 1

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ManifestRecord":
        return cls(**json.loads(line))


def save_manifest(path: str | Path, records: list[ManifestRecord]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    if not path.exists():
        raise InputError(f"no manifest at {path}")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(ManifestRecord.from_json(line))
    return out


def by_split(records: list[ManifestRecord], split: str) -> list[ManifestRecord]:
    return [r for r in records if r.split == split]


class FeatureStore:
    """Featurizes on first access, then serves from memory.

    The cache holds the unaugmented features; masking is applied on the
    way out so each epoch sees fresh masks while WAVs are read once.
    """

    def __init__(self, root: str | Path, cfg: FeatureConfig):
        self.root = Path(root)
        self.cfg = cfg
        self._cache: dict[str, np.ndarray] = {}

    def features(self, rec: ManifestRecord) -> np.ndarray:
        hit = self._cache.get(rec.utt_id)
        if hit is None:
            buf = read_wav(self.root / rec.wav)
            hit = featurize(buf, self.cfg).frames
            self._cache[rec.utt_id] = hit
        return hit

    def augmented(self, rec: ManifestRecord, seed: int) -> np.ndarray:
        from .features import FeatureMatrix

        base = FeatureMatrix(self.features(rec), self.cfg.frame_stride_ms,
                             self.cfg.receptive_field_ms)
        cfg = self.cfg
        return apply_masking(base, cfg.n_time_masks, cfg.max_time_width,
                             cfg.n_freq_masks, cfg.max_freq_width, seed).frames

    def __len__(self) -> int:
        return len(self._cache)


def duration_batches(records: list[ManifestRecord], target_minutes: float,
                     rng: np.random.Generator) -> list[list[ManifestRecord]]:
    """Shuffle, then group so each batch holds close to target_minutes of
    audio; every batch except possibly the last lands in [0.8, 1.2] times
    the target.  Records are repeated upsample_factor times before the
    shuffle."""
    if target_minutes <= 0:
        raise InputError("target_minutes must be positive")
    target_s = 60.0 * target_minutes
    order = [r for r in records for _ in range(max(1, r.upsample_factor))]
    rng.shuffle(order)
    batches: list[list[ManifestRecord]] = []
    cur: list[ManifestRecord] = []
    cur_s = 0.0
    for rec in order:
        if cur and cur_s + rec.duration_s > 1.2 * target_s:
            batches.append(cur)
            cur, cur_s = [], 0.0
        cur.append(rec)
        cur_s += rec.duration_s
        if cur_s >= 0.8 * target_s:
            batches.append(cur)
            cur, cur_s = [], 0.0
    if cur:
        batches.append(cur)
    return batches
