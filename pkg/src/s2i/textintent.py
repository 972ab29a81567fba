"""Transcript-side intent classifier for the cascade baseline.

TF-IDF bag of words into a softmax regression.  The classifier runs on
the same tensor kernel and checkpoint container as the acoustic models,
so every artifact in a run directory shares one format.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CheckpointError, InputError
from .nn import tensor as tt
from .nn.layers import Linear
from .nn.optim import Adam
from .nn.tensor import Tensor, no_grad


def tokenize(text: str) -> list[str]:
    return text.lower().split()


class TfidfVocab:
    """Token inventory with idf = ln((1+N)/(1+df)) + 1."""

    def __init__(self, tokens: list[str], idf: list[float]):
        if len(tokens) != len(idf):
            raise InputError("tokens and idf length mismatch")
        self.tokens = list(tokens)
        self.idf = np.asarray(idf, dtype=np.float64)
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    @classmethod
    def fit(cls, texts: list[str]) -> "TfidfVocab":
        df: dict[str, int] = {}
        for text in texts:
            for tok in set(tokenize(text)):
                df[tok] = df.get(tok, 0) + 1
        tokens = sorted(df)
        n = len(texts)
        idf = [np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in tokens]
        return cls(tokens, idf)

    def vector(self, text: str) -> np.ndarray:
        """L2-normalized tf-idf; unseen tokens are dropped, empty input
        stays the zero vector."""
        v = np.zeros(self.size)
        for tok in tokenize(text):
            i = self.index.get(tok)
            if i is not None:
                v[i] += 1.0
        v *= self.idf
        norm = np.linalg.norm(v)
        if norm > 0:
            v /= norm
        return v

    def matrix(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.vector(t) for t in texts]) if texts else \
            np.zeros((0, self.size))


class TextIntentModel:
    """Linear softmax classifier over tf-idf vectors.

    The empty transcript short-circuits to the designated silence class
    with full confidence; it never reaches the linear layer.
    """

    def __init__(self, vocab: TfidfVocab, n_intents: int, blank_intent: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.vocab = vocab
        self.n_intents = n_intents
        self.blank_intent = blank_intent
        self.linear = Linear(vocab.size, n_intents, rng, dtype, "textintent")

    def params(self):
        return self.linear.params()

    def fit(self, texts: list[str], labels: list[int], epochs: int = 300,
            lr: float = 0.05, weight_decay: float = 1e-4) -> list[float]:
        if len(texts) != len(labels):
            raise InputError("texts and labels must pair up")
        x = self.vocab.matrix(texts).astype(self.linear.w.value.dtype)
        y = np.asarray(labels, dtype=np.int64)
        opt = Adam([p for _, p in self.params()])
        losses = []
        for _ in range(epochs):
            opt.zero_grad()
            logits = self.linear(Tensor(x))
            loss = tt.cross_entropy(logits, y)
            if weight_decay:
                loss = tt.add(loss, tt.mul(tt.tsum(tt.mul(self.linear.w,
                                                          self.linear.w)),
                                           weight_decay))
            loss.backward()
            opt.step(lr)
            losses.append(float(loss.value))
        return losses

    def classify(self, text: str) -> tuple[int, float]:
        if not text.strip():
            return self.blank_intent, 1.0
        v = self.vocab.vector(text).astype(self.linear.w.value.dtype)
        with no_grad():
            logits = self.linear(Tensor(v[None, :])).value[0]
        probs = tt.softmax_np(logits.astype(np.float64))
        intent = int(np.argmax(probs))
        return intent, float(probs[intent])

    def save(self, path: str | Path) -> None:
        from .models import save_checkpoint

        save_checkpoint(path, "textintent",
                        {"n_intents": self.n_intents,
                         "blank_intent": self.blank_intent},
                        self.params(),
                        extra={"tokens": self.vocab.tokens,
                               "idf": [float(x) for x in self.vocab.idf]})

    @classmethod
    def load(cls, path: str | Path) -> "TextIntentModel":
        from .models import load_checkpoint, _load_params

        kind, cfg, tensors, extra = load_checkpoint(path)
        if kind != "textintent":
            raise CheckpointError(f"expected a textintent checkpoint, found {kind!r}")
        vocab = TfidfVocab(extra["tokens"], extra["idf"])
        model = cls(vocab, int(cfg["n_intents"]), int(cfg["blank_intent"]))
        _load_params(model.params(), tensors)
        return model
