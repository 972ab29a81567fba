"""Backoff n-gram language model for hypothesis rescoring.

Interpolated absolute discounting with a fixed discount: for a seen
context h with continuation-summed count c(h) and N1+(h) distinct
continuations,

    P(w | h) = max(c(hw) - D, 0) / c(h)  +  D * N1+(h) / c(h) * P(w | h')

and unseen contexts back off entirely to the shorter context.  At the
unigram level the leftover mass is spread uniformly over the scoring
vocabulary (all pieces plus the end symbol), so no token ever scores
-inf and every conditional distribution sums to exactly 1.

The trained model is stored as explicit probability/backoff tables, which
is also what the ARPA text format holds, so save/load is an exact round
trip and scoring has a single code path.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from pathlib import Path

from . import instrumentation
from .errors import InputError

BOS = -1
EOS = -2

_BOS_TOKEN = "<s>"
_EOS_TOKEN = "</s>"
_PLACEHOLDER = -99.0   # log10 stand-in for history-only rows


class NgramLm:
    def __init__(self, order: int, vocab_size: int, probs: dict, backoffs: dict,
                 counts: dict | None = None, context_totals: dict | None = None):
        self.order = order
        self.vocab_size = vocab_size          # piece ids 0..vocab_size-1
        self.probs = probs                    # ngram tuple -> log prob
        self.backoffs = backoffs              # context tuple -> log backoff weight
        self.counts = counts or {}            # raw event counts, kept for inspection
        self.context_totals = context_totals or {}

    # -- scoring --------------------------------------------------------

    def score_vocab(self):
        """Tokens a conditional distribution ranges over."""
        return list(range(self.vocab_size)) + [EOS]

    def cond_log_prob(self, word: int, context: tuple = ()) -> float:
        """log P(word | context), context given oldest-first."""
        instrumentation.bump(instrumentation.LM_QUERIES)
        return self._lookup(tuple(context)[-(self.order - 1):], word)

    def _lookup(self, context: tuple, word: int) -> float:
        ngram = context + (word,)
        if ngram in self.probs:
            return self.probs[ngram]
        if not context:
            raise InputError(f"token {word} missing from unigram table")
        bow = self.backoffs.get(context, 0.0)
        return bow + self._lookup(context[1:], word)

    def prefix_log_prob(self, ids) -> float:
        """log P(ids ...), no end symbol: monotone non-increasing in length."""
        ids = self._checked(ids)
        total = 0.0
        history = (BOS,) * (self.order - 1)
        for tok in ids:
            total += self.cond_log_prob(tok, history)
            history = history[1:] + (tok,)
        return total

    def sequence_log_prob(self, ids) -> float:
        """log P(ids) as a complete sentence, begin/end symbols included."""
        ids = self._checked(ids)
        history = (BOS,) * (self.order - 1)
        total = 0.0
        for tok in list(ids) + [EOS]:
            total += self.cond_log_prob(tok, history)
            history = history[1:] + (tok,)
        return total

    def _checked(self, ids):
        ids = list(ids)
        if any(not (0 <= i < self.vocab_size) for i in ids):
            raise InputError("sequence contains out-of-vocab ids")
        return ids

    # -- serialization (ARPA-style, pieces rendered as integer ids) -----

    def save_arpa(self, path: str | Path) -> None:
        grams = defaultdict(list)
        for ngram in self.probs:
            grams[len(ngram)].append(ngram)
        # Sentence-start histories carry a backoff weight but no
        # probability of their own; give them the conventional -99
        # placeholder row so the weight has somewhere to live.
        for ctx in self.backoffs:
            if ctx not in self.probs:
                grams[len(ctx)].append(ctx)
        lines = [f"# vocab_size={self.vocab_size} order={self.order}", "\\data\\"]
        for n in range(1, self.order + 1):
            lines.append(f"ngram {n}={len(grams[n])}")
        lines.append("")
        ln10 = math.log(10.0)
        for n in range(1, self.order + 1):
            lines.append(f"\\{n}-grams:")
            for ngram in sorted(grams[n]):
                lp = self.probs.get(ngram)
                head = _PLACEHOLDER if lp is None else lp / ln10
                row = f"{head!r}\t{' '.join(_render(t) for t in ngram)}"
                if n < self.order and ngram in self.backoffs:
                    row += f"\t{self.backoffs[ngram] / ln10!r}"
                lines.append(row)
            lines.append("")
        lines.append("\\end\\")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load_arpa(cls, path: str | Path) -> "NgramLm":
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text or not text[0].startswith("# vocab_size="):
            raise InputError(f"{path}: not an LM file")
        head = dict(kv.split("=") for kv in text[0][2:].split())
        vocab_size = int(head["vocab_size"])
        order = int(head["order"])
        probs, backoffs = {}, {}
        ln10 = math.log(10.0)
        section = 0
        for line in text[1:]:
            line = line.rstrip()
            if not line or line in ("\\data\\", "\\end\\") or line.startswith("ngram "):
                continue
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1])
                continue
            parts = line.split("\t")
            ngram = tuple(_parse(t) for t in parts[1].split(" "))
            if len(ngram) != section:
                raise InputError(f"{path}: bad row in {section}-gram section")
            head = float(parts[0])
            if head != _PLACEHOLDER:
                probs[ngram] = head * ln10
            if len(parts) == 3:
                backoffs[ngram] = float(parts[2]) * ln10
        return cls(order, vocab_size, probs, backoffs)


def _render(tok: int) -> str:
    if tok == BOS:
        return _BOS_TOKEN
    if tok == EOS:
        return _EOS_TOKEN
    return str(tok)


def _parse(tok: str) -> int:
    if tok == _BOS_TOKEN:
        return BOS
    if tok == _EOS_TOKEN:
        return EOS
    return int(tok)


def train_ngram(corpus: list, vocab_size: int, order: int = 3,
                discount: float = 0.75) -> NgramLm:
    """Count n-gram events over id sequences and build interpolated tables.

    corpus: iterable of token-id sequences (ints in [0, vocab_size)).
    Sentence boundary symbols are added internally.  Context counts are
    continuation-summed, which is what makes every conditional
    distribution sum to exactly 1.
    """
    if not corpus:
        raise InputError("empty corpus")
    if not 0.0 < discount < 1.0:
        raise InputError("discount must lie in (0, 1)")

    counts = {n: Counter() for n in range(1, order + 1)}
    ctx_totals = {n: Counter() for n in range(2, order + 1)}
    continuations = {n: defaultdict(set) for n in range(2, order + 1)}

    for seq in corpus:
        seq = list(seq)
        if any(not (0 <= t < vocab_size) for t in seq):
            raise InputError("corpus contains out-of-vocab ids")
        padded = [BOS] * (order - 1) + seq + [EOS]
        for pos in range(order - 1, len(padded)):
            for n in range(1, order + 1):
                gram = tuple(padded[pos - n + 1:pos + 1])
                counts[n][gram] += 1
                if n >= 2:
                    ctx_totals[n][gram[:-1]] += 1
                    continuations[n][gram[:-1]].add(gram[-1])

    n_tokens = sum(counts[1].values())
    uni_types = len(counts[1])
    uniform = 1.0 / (vocab_size + 1)          # every piece + EOS
    uni_lambda = discount * uni_types / n_tokens

    def unigram_prob(w: int) -> float:
        c = counts[1].get((w,), 0)
        return max(c - discount, 0.0) / n_tokens + uni_lambda * uniform

    def interp_prob(ngram: tuple) -> float:
        n = len(ngram)
        if n == 1:
            return unigram_prob(ngram[0])
        ctx = ngram[:-1]
        c_ctx = ctx_totals[n].get(ctx, 0)
        if c_ctx == 0:
            return interp_prob(ngram[1:])
        lam = discount * len(continuations[n][ctx]) / c_ctx
        return (max(counts[n].get(ngram, 0) - discount, 0.0) / c_ctx
                + lam * interp_prob(ngram[1:]))

    probs: dict = {}
    backoffs: dict = {}
    for w in range(vocab_size):
        probs[(w,)] = math.log(unigram_prob(w))
    probs[(EOS,)] = math.log(unigram_prob(EOS))
    for n in range(2, order + 1):
        for ngram in counts[n]:
            probs[ngram] = math.log(interp_prob(ngram))
        for ctx, cont in continuations[n].items():
            backoffs[ctx] = math.log(discount * len(cont) / ctx_totals[n][ctx])

    return NgramLm(order, vocab_size, probs, backoffs,
                   counts=counts, context_totals=ctx_totals)


def lm_score(lm: NgramLm, ids) -> float:
    return lm.sequence_log_prob(ids)
