"""Acoustic trunk, per-level decoder heads, and the intent head.

The trunk is three stacked recurrent blocks.  Each block is a few
bidirectional LSTM layers followed by a residual self-attention mix and
a layer norm; each block also feeds its own linear head so the three
granularities are supervised at increasing depth.  The intent head pools
the last block over time, either by attention (query built from the
final cell state) or by a plain time average, and classifies the pooled
vector directly; no decoding is involved on that path.

Checkpoints are a single binary file: magic, little-endian uint32 header
length, JSON header (kind, config, tensor names and shapes, vocab
contents), then raw float32 payload in header order.  Since parameters
are stored at their native width the round trip is bitwise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import ctc
from .config import DecodeConfig, ModelConfig
from .errors import CheckpointError, InputError
from .nn import tensor as tt
from .nn.layers import BiLstm, LayerNorm, Linear, Mha
from .nn.tensor import Tensor, no_grad
from .subwords import SubwordVocab

MAGIC = b"S2ICKPT1"


class TrunkBlock:
    def __init__(self, in_dim: int, cfg: ModelConfig, n_layers: int,
                 rng: np.random.Generator, dtype, name: str):
        self.name = name
        self.lstms = []
        for j in range(n_layers):
            d = in_dim if j == 0 else cfg.model_dim
            self.lstms.append(BiLstm(d, cfg.hidden_dim, rng, dtype,
                                     f"{name}.lstm{j}"))
        self.attn = Mha(cfg.model_dim, cfg.n_heads, rng, dtype, f"{name}.attn")
        self.norm = LayerNorm(cfg.model_dim, dtype, f"{name}.norm")

    def forward(self, x: Tensor):
        """Returns (block output (T, model_dim), final cell of last layer)."""
        final_cell = None
        for lstm in self.lstms:
            x, final_cell = lstm.forward(x)
        mixed = self.attn(x, x, x)
        y = self.norm(tt.add(x, mixed))
        return y, final_cell

    def params(self):
        out = []
        for lstm in self.lstms:
            out.extend(lstm.params())
        out.extend(self.attn.params())
        out.extend(self.norm.params())
        return out


class HctcModel:
    """Three-block trunk with one blank-augmented head per granularity."""

    def __init__(self, config: ModelConfig, input_dim: int,
                 vocabs: list[SubwordVocab], rng: np.random.Generator,
                 dtype=np.float32):
        config.validate()
        if len(vocabs) != len(config.block_layers):
            raise InputError("need one vocabulary per trunk block")
        self.config = config
        self.input_dim = input_dim
        self.vocabs = list(vocabs)
        self.dtype = dtype
        self.blocks = []
        d = input_dim
        for i, n_layers in enumerate(config.block_layers):
            self.blocks.append(TrunkBlock(d, config, n_layers, rng, dtype,
                                          f"block{i}"))
            d = config.model_dim
        self.heads = [Linear(config.model_dim, v.size + 1, rng, dtype, f"head{i}")
                      for i, v in enumerate(self.vocabs)]

    def params(self):
        out = []
        for b in self.blocks:
            out.extend(b.params())
        for h in self.heads:
            out.extend(h.params())
        return out

    def set_freeze(self, n_blocks: int) -> None:
        """Stop gradients into the first n_blocks trunk blocks."""
        for i, b in enumerate(self.blocks):
            flag = i >= n_blocks
            for _, p in b.params():
                p.requires_grad = flag

    def trunk_forward(self, feats: np.ndarray):
        """All block outputs and the last block's final cell state."""
        x = Tensor(np.asarray(feats, dtype=self.dtype))
        outs = []
        final_cell = None
        for b in self.blocks:
            x, final_cell = b.forward(x)
            outs.append(x)
        return outs, final_cell

    def asr_forward(self, feats: np.ndarray) -> list[Tensor]:
        """Per-level logits, one (T, vocab+1) tensor per block."""
        outs, _ = self.trunk_forward(feats)
        return [head(y) for head, y in zip(self.heads, outs)]

    def level_logprobs(self, feats: np.ndarray, level: int = -1) -> np.ndarray:
        with no_grad():
            logits = self.asr_forward(feats)[level]
        return tt.log_softmax_np(np.asarray(logits.value, dtype=np.float64))

    def transcribe(self, feats: np.ndarray, decode: DecodeConfig | None = None,
                   lm=None, level: int = -1) -> "TranscribeResult":
        decode = decode or DecodeConfig()
        vocab = self.vocabs[level]
        lp = self.level_logprobs(feats, level)
        prune = decode.prune_top_k if decode.prune_top_k else None
        hyps = ctc.prefix_beam_search(lp, vocab.blank_id, decode.beam_width,
                                      prune)
        hyps = ctc.rerank(hyps[:decode.n_best], lm, decode.lm_alpha,
                          decode.length_beta)
        text = vocab.detokenize(hyps[0].ids)
        return TranscribeResult(text=text, hyps=hyps, level=level)

    def greedy_transcribe(self, feats: np.ndarray, level: int = -1) -> str:
        vocab = self.vocabs[level]
        lp = self.level_logprobs(feats, level)
        return vocab.detokenize(ctc.greedy_decode(lp, vocab.blank_id))

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, "hctc", _model_config_dict(self.config),
                        self.params(),
                        extra={"input_dim": self.input_dim,
                               "vocabs": [_vocab_dict(v) for v in self.vocabs]})

    @classmethod
    def load(cls, path: str | Path) -> "HctcModel":
        kind, cfg_dict, tensors, extra = load_checkpoint(path)
        if kind != "hctc":
            raise CheckpointError(f"expected an hctc checkpoint, found {kind!r}")
        config = _model_config_from(cfg_dict)
        vocabs = [_vocab_from(d) for d in extra["vocabs"]]
        model = cls(config, int(extra["input_dim"]), vocabs,
                    np.random.default_rng(0))
        _load_params(model.params(), tensors)
        return model


@dataclass
class TranscribeResult:
    text: str
    hyps: list
    level: int


class S2IModel:
    """Intent classifier on top of a trunk; predicts without decoding."""

    def __init__(self, trunk: HctcModel, n_intents: int,
                 rng: np.random.Generator, dtype=np.float32):
        cfg = trunk.config
        self.trunk = trunk
        self.n_intents = n_intents
        self.query_proj = Linear(cfg.model_dim, cfg.model_dim, rng, dtype,
                                 "pool.query")
        self.pool_attn = Mha(cfg.model_dim, cfg.n_heads, rng, dtype, "pool.attn")
        self.classifier = Linear(cfg.model_dim, n_intents, rng, dtype, "intent")

    def params(self):
        out = list(self.trunk.params())
        if self.trunk.config.pool == "mha":
            out.extend(self.query_proj.params())
            out.extend(self.pool_attn.params())
        out.extend(self.classifier.params())
        return out

    def forward(self, feats: np.ndarray) -> Tensor:
        outs, final_cell = self.trunk.trunk_forward(feats)
        y = outs[-1]
        if self.trunk.config.pool == "mha":
            q = self.query_proj(tt.reshape(final_cell, (1, -1)))
            pooled = self.pool_attn(q, y, y)
        else:
            pooled = tt.tmean(y, axis=0, keepdims=True)
        return self.classifier(pooled)

    def predict(self, feats: np.ndarray) -> tuple[int, float]:
        """Intent id and softmax confidence; no search, no rescoring."""
        with no_grad():
            logits = self.forward(feats).value[0]
        probs = tt.softmax_np(logits.astype(np.float64))
        intent = int(np.argmax(probs))
        return intent, float(probs[intent])

    def save(self, path: str | Path) -> None:
        trunk = self.trunk
        save_checkpoint(path, "s2i", _model_config_dict(trunk.config),
                        self.params(),
                        extra={"input_dim": trunk.input_dim,
                               "n_intents": self.n_intents,
                               "vocabs": [_vocab_dict(v) for v in trunk.vocabs]})

    @classmethod
    def load(cls, path: str | Path) -> "S2IModel":
        kind, cfg_dict, tensors, extra = load_checkpoint(path)
        if kind != "s2i":
            raise CheckpointError(f"expected an s2i checkpoint, found {kind!r}")
        config = _model_config_from(cfg_dict)
        vocabs = [_vocab_from(d) for d in extra["vocabs"]]
        trunk = HctcModel(config, int(extra["input_dim"]), vocabs,
                          np.random.default_rng(0))
        model = cls(trunk, int(extra["n_intents"]), np.random.default_rng(0))
        _load_params(model.params(), tensors)
        return model


# -- checkpoint container ----------------------------------------------


def save_checkpoint(path: str | Path, kind: str, config: dict,
                    named_params: list, extra: dict | None = None) -> None:
    names = [n for n, _ in named_params]
    if len(set(names)) != len(names):
        raise CheckpointError("duplicate parameter names")
    header = {
        "kind": kind,
        "config": config,
        "tensors": [[n, list(p.value.shape)] for n, p in named_params],
        "extra": extra or {},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, p in named_params:
            f.write(np.ascontiguousarray(p.value, dtype=np.float32).tobytes())


def load_checkpoint(path: str | Path):
    raw = Path(path).read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<I", raw[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    header = json.loads(raw[start:start + hlen].decode("utf-8"))
    offset = start + hlen
    tensors = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated payload at {name}")
        tensors[name] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return header["kind"], header["config"], tensors, header["extra"]


def _load_params(named_params: list, tensors: dict) -> None:
    names = [n for n, _ in named_params]
    missing = [n for n in names if n not in tensors]
    surplus = [n for n in tensors if n not in set(names)]
    if missing or surplus:
        raise CheckpointError(
            f"parameter mismatch; missing={missing[:3]} surplus={surplus[:3]}")
    for name, p in named_params:
        arr = tensors[name]
        if tuple(arr.shape) != tuple(p.value.shape):
            raise CheckpointError(
                f"{name}: shape {arr.shape} != expected {p.value.shape}")
        p.value = arr.astype(p.value.dtype).copy()


def _model_config_dict(cfg: ModelConfig) -> dict:
    d = asdict(cfg)
    d["block_layers"] = list(cfg.block_layers)
    return d


def _model_config_from(d: dict) -> ModelConfig:
    d = dict(d)
    d["block_layers"] = tuple(d["block_layers"])
    cfg = ModelConfig(**d)
    cfg.validate()
    return cfg


def _vocab_dict(v: SubwordVocab) -> dict:
    return {"level": v.level, "pieces": v.pieces,
            "log_probs": [float(x) for x in v.log_probs],
            "hash": v.content_hash()}


def _vocab_from(d: dict) -> SubwordVocab:
    v = SubwordVocab(d["pieces"], d["log_probs"], d["level"])
    if "hash" in d and v.content_hash() != d["hash"]:
        raise CheckpointError("vocabulary content hash mismatch")
    return v
