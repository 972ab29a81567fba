"""Token transliteration: exact table first, tiny seq2seq as fallback.

Words found in the mapping table are replaced directly; everything else
goes through a one-layer encoder-decoder with summed character and
position embeddings, decoded greedily.  Decoding stops at the end
symbol or at max_len_factor times the input length, whichever comes
first; hitting the cap marks the output as truncated.

Both paths bump shared counters, so callers can verify table precedence
without inspecting internals.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import instrumentation as instr
from .config import TranslitConfig
from .errors import CheckpointError, InputError
from .nn import tensor as tt
from .nn.layers import Embedding, LayerNorm, Linear, Mha, causal_mask
from .nn.optim import Adam
from .nn.tensor import Tensor, no_grad

ALPHABET = "abcdefghijklmnopqrstuvwxyz"
BOS, EOS = 26, 27
N_SYMBOLS = 28
MAX_POSITIONS = 64


class TranslitTable:
    """Exact word-to-word mapping loaded from two tab-separated columns."""

    def __init__(self, mapping: dict | None = None):
        self.mapping = dict(mapping or {})

    def __len__(self) -> int:
        return len(self.mapping)

    def get(self, word: str) -> str | None:
        return self.mapping.get(word)

    def save(self, path: str | Path) -> None:
        lines = [f"{src}\t{dst}" for src, dst in sorted(self.mapping.items())]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TranslitTable":
        mapping = {}
        for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{ln}: expected two tab-separated fields")
            mapping[parts[0]] = parts[1]
        return cls(mapping)


def _ids(word: str) -> np.ndarray:
    try:
        return np.asarray([ALPHABET.index(c) for c in word], dtype=np.int64)
    except ValueError:
        raise InputError(f"word {word!r} has characters outside a-z") from None


class _Ffn:
    def __init__(self, dm, ffn, rng, dtype, name):
        self.lin1 = Linear(dm, ffn, rng, dtype, f"{name}.1")
        self.lin2 = Linear(ffn, dm, rng, dtype, f"{name}.2")

    def __call__(self, x):
        return self.lin2(tt.relu(self.lin1(x)))

    def params(self):
        return self.lin1.params() + self.lin2.params()


class Seq2SeqTranslit:
    """One encoder layer, one decoder layer, greedy decoding."""

    def __init__(self, cfg: TranslitConfig, rng: np.random.Generator,
                 dtype=np.float32):
        dm = cfg.model_dim
        self.cfg = cfg
        self.dtype = dtype
        self.src_emb = Embedding(N_SYMBOLS, dm, rng, dtype, "src_emb")
        self.tgt_emb = Embedding(N_SYMBOLS, dm, rng, dtype, "tgt_emb")
        self.pos_emb = Embedding(MAX_POSITIONS, dm, rng, dtype, "pos_emb")
        self.enc_attn = Mha(dm, cfg.n_heads, rng, dtype, "enc.attn")
        self.enc_n1 = LayerNorm(dm, dtype, "enc.n1")
        self.enc_ffn = _Ffn(dm, cfg.ffn_dim, rng, dtype, "enc.ffn")
        self.enc_n2 = LayerNorm(dm, dtype, "enc.n2")
        self.dec_self = Mha(dm, cfg.n_heads, rng, dtype, "dec.self")
        self.dec_n1 = LayerNorm(dm, dtype, "dec.n1")
        self.dec_cross = Mha(dm, cfg.n_heads, rng, dtype, "dec.cross")
        self.dec_n2 = LayerNorm(dm, dtype, "dec.n2")
        self.dec_ffn = _Ffn(dm, cfg.ffn_dim, rng, dtype, "dec.ffn")
        self.dec_n3 = LayerNorm(dm, dtype, "dec.n3")
        self.out = Linear(dm, N_SYMBOLS, rng, dtype, "out")

    def params(self):
        parts = [self.src_emb, self.tgt_emb, self.pos_emb, self.enc_attn,
                 self.enc_n1, self.enc_ffn, self.enc_n2, self.dec_self,
                 self.dec_n1, self.dec_cross, self.dec_n2, self.dec_ffn,
                 self.dec_n3, self.out]
        out = []
        for p in parts:
            out.extend(p.params())
        return out

    def _embed(self, table: Embedding, ids: np.ndarray) -> Tensor:
        if len(ids) > MAX_POSITIONS:
            raise InputError(f"sequence longer than {MAX_POSITIONS} positions")
        return tt.add(table(ids), self.pos_emb(np.arange(len(ids))))

    def encode(self, src_ids: np.ndarray) -> Tensor:
        x = self._embed(self.src_emb, src_ids)
        x = self.enc_n1(tt.add(x, self.enc_attn(x, x, x)))
        return self.enc_n2(tt.add(x, self.enc_ffn(x)))

    def decode_logits(self, memory: Tensor, tgt_ids: np.ndarray) -> Tensor:
        y = self._embed(self.tgt_emb, tgt_ids)
        mask = causal_mask(len(tgt_ids), self.dtype)
        y = self.dec_n1(tt.add(y, self.dec_self(y, y, y, mask)))
        y = self.dec_n2(tt.add(y, self.dec_cross(y, memory, memory)))
        y = self.dec_n3(tt.add(y, self.dec_ffn(y)))
        return self.out(y)

    def loss(self, src: str, dst: str) -> Tensor:
        src_ids = _ids(src)
        dst_ids = _ids(dst)
        dec_in = np.concatenate([[BOS], dst_ids])
        dec_target = np.concatenate([dst_ids, [EOS]])
        memory = self.encode(src_ids)
        logits = self.decode_logits(memory, dec_in)
        return tt.cross_entropy(logits, dec_target)

    def fit(self, pairs: list[tuple[str, str]], rng: np.random.Generator,
            epochs: int | None = None, lr: float | None = None) -> list[float]:
        epochs = epochs if epochs is not None else self.cfg.epochs
        lr = lr if lr is not None else self.cfg.lr
        opt = Adam([p for _, p in self.params()])
        history = []
        order = list(pairs)
        for _ in range(epochs):
            rng.shuffle(order)
            total = 0.0
            for src, dst in order:
                opt.zero_grad()
                loss = self.loss(src, dst)
                loss.backward()
                opt.step(lr)
                total += float(loss.value)
            history.append(total / max(len(order), 1))
        return history

    def greedy(self, word: str) -> tuple[str, bool]:
        """Transliterate one word; True in the second slot means the
        length cap cut the output short."""
        src_ids = _ids(word)
        cap = max(1, self.cfg.max_len_factor * len(src_ids))
        with no_grad():
            memory = self.encode(src_ids)
            out: list[int] = []
            dec = [BOS]
            for _ in range(cap):
                logits = self.decode_logits(memory, np.asarray(dec)).value
                nxt = int(np.argmax(logits[-1]))
                if nxt == EOS:
                    return "".join(ALPHABET[i] for i in out), False
                nxt = min(nxt, len(ALPHABET) - 1)  # BOS never emitted
                out.append(nxt)
                dec.append(nxt)
        return "".join(ALPHABET[i] for i in out), True

    def save(self, path: str | Path) -> None:
        from dataclasses import asdict

        from .models import save_checkpoint

        save_checkpoint(path, "translit", asdict(self.cfg), self.params())

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqTranslit":
        from .models import load_checkpoint, _load_params

        kind, cfg_dict, tensors, _ = load_checkpoint(path)
        if kind != "translit":
            raise CheckpointError(f"expected a translit checkpoint, found {kind!r}")
        model = cls(TranslitConfig(**cfg_dict), np.random.default_rng(0))
        _load_params(model.params(), tensors)
        return model


@dataclass
class TranslitResult:
    text: str
    truncated: bool
    table_hits: int
    model_calls: int


def transliterate(text: str, table: TranslitTable,
                  model: Seq2SeqTranslit | None = None) -> TranslitResult:
    """Word by word: table match wins, the model handles the rest."""
    words_out = []
    truncated = False
    hits = calls = 0
    for word in text.split():
        mapped = table.get(word)
        if mapped is not None:
            instr.bump(instr.TRANSLIT_TABLE_HITS)
            hits += 1
            words_out.append(mapped)
            continue
        if model is None:
            raise InputError(f"word {word!r} not in table and no model given")
        instr.bump(instr.TRANSLIT_MODEL_CALLS)
        calls += 1
        out, trunc = model.greedy(word)
        truncated = truncated or trunc
        words_out.append(out)
    return TranslitResult(" ".join(words_out), truncated, hits, calls)


# -- synthetic training data -------------------------------------------


def make_translit_data(seed: int = 0, n_words: int = 400, n_exceptions: int = 50,
                       n_heldout: int = 120):
    """Character-substitution language with a table of exceptions.

    Regular words follow a fixed bijective a-z permutation; exception
    words map to arbitrary targets and belong in the lookup table.
    Held-out words also follow the permutation, so a model that learns
    the cipher generalizes to them.
    Returns (train_pairs, heldout_pairs, table).
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(26)
    charmap = {ALPHABET[i]: ALPHABET[perm[i]] for i in range(26)}

    def regular(word: str) -> str:
        return "".join(charmap[c] for c in word)

    def random_word() -> str:
        n = int(rng.integers(3, 8))
        return "".join(ALPHABET[int(i)] for i in rng.integers(0, 26, size=n))

    seen = set()
    words = []
    while len(words) < n_words + n_heldout + n_exceptions:
        w = random_word()
        if w not in seen:
            seen.add(w)
            words.append(w)
    train_words = words[:n_words]
    heldout_words = words[n_words:n_words + n_heldout]
    exc_words = words[n_words + n_heldout:]

    train_pairs = [(w, regular(w)) for w in train_words]
    heldout_pairs = [(w, regular(w)) for w in heldout_words]
    table = TranslitTable({w: random_word() for w in exc_words})
    return train_pairs, heldout_pairs, table
