"""Cascade baseline: transcribe first, then classify the transcript."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .config import DecodeConfig
from .errors import StageError
from .models import HctcModel
from .textintent import TextIntentModel


@dataclass
class PipelineResult:
    intent: int
    confidence: float
    transcript: str
    stage_s: dict = field(default_factory=dict)


def pipeline_predict(feats, asr: HctcModel, text_model: TextIntentModel,
                     decode: DecodeConfig | None = None, lm=None,
                     level: int = -1) -> PipelineResult:
    """Run the two stages with per-stage wall time.

    Failures carry the stage name so callers can tell a decoding problem
    from a classification problem.
    """
    t0 = time.perf_counter()
    try:
        transcript = asr.transcribe(feats, decode, lm, level).text
    except Exception as e:  # noqa: BLE001 - tagged and re-raised
        raise StageError("decode", e) from e
    t1 = time.perf_counter()
    try:
        intent, conf = text_model.classify(transcript)
    except Exception as e:  # noqa: BLE001 - tagged and re-raised
        raise StageError("classify", e) from e
    t2 = time.perf_counter()
    return PipelineResult(intent, conf, transcript,
                          {"decode": t1 - t0, "classify": t2 - t1})
