"""Subword vocabularies: unigram-model training and Viterbi segmentation.

Three granularities share one mechanism: "char" vocabularies degenerate to
the alphabet with frequency probabilities, "short" and "long" ones are
trained by EM over the segmentation lattice followed by likelihood-loss
pruning down to the target size.  Every alphabet character always stays in
the vocabulary, so any in-alphabet string is segmentable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError

UNK_PIECE = "<unk>"
UNK_LOG_PROB = -20.0

LEVELS = ("char", "short", "long")


@dataclass
class Segmentation:
    ids: list
    oov_count: int = 0


class SubwordVocab:
    """Immutable piece inventory with unigram log-probabilities.

    Piece ids are dense in [0, size).  The CTC blank is not a piece: by
    convention it lives at index `size`, the last column of a (size+1)-wide
    decoder head.
    """

    def __init__(self, pieces: list, log_probs: list, level: str):
        if level not in LEVELS:
            raise ConfigError(f"unknown vocab level: {level!r}")
        if len(pieces) != len(log_probs):
            raise InputError("pieces and log_probs length mismatch")
        self.level = level
        self.pieces = list(pieces)
        self.log_probs = [float(p) for p in log_probs]
        self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}
        if len(self.piece_to_id) != len(self.pieces):
            raise InputError("duplicate pieces")
        self.unk_id = self.piece_to_id[UNK_PIECE]
        self.max_piece_len = max(len(p) for p in self.pieces)
        self.alphabet = {p for p in self.pieces if len(p) == 1}

    @property
    def size(self) -> int:
        return len(self.pieces)

    @property
    def blank_id(self) -> int:
        return self.size

    def id_of(self, piece: str) -> int:
        return self.piece_to_id[piece]

    # -- segmentation ---------------------------------------------------

    def segment(self, text: str) -> Segmentation:
        """Maximum-likelihood segmentation (Viterbi over the piece lattice).

        Out-of-alphabet characters map to the UNK piece and are counted in
        the result.  Ties break toward the longest final piece, which makes
        the output deterministic.
        """
        n = len(text)
        if n == 0:
            return Segmentation([])
        NEG = -math.inf
        best = [NEG] * (n + 1)
        back = [None] * (n + 1)   # (start, piece_id)
        best[0] = 0.0
        for end in range(1, n + 1):
            lo = max(0, end - self.max_piece_len)
            for start in range(lo, end):
                if best[start] == NEG:
                    continue
                sub = text[start:end]
                pid = self.piece_to_id.get(sub)
                if pid is None:
                    if end - start == 1:
                        pid = self.unk_id
                    else:
                        continue
                score = best[start] + self.log_probs[pid]
                # Strict > keeps the earliest (longest-piece) split on ties.
                if score > best[end]:
                    best[end] = score
                    back[end] = (start, pid)
        ids = []
        pos = n
        while pos > 0:
            start, pid = back[pos]
            ids.append(pid)
            pos = start
        ids.reverse()
        oov = sum(1 for i in ids if i == self.unk_id)
        return Segmentation(ids, oov)

    def detokenize(self, ids) -> str:
        out = []
        for i in ids:
            if not 0 <= i < self.size:
                raise InputError(f"unknown piece id {i}")
            out.append("□" if i == self.unk_id else self.pieces[i])
        return "".join(out)

    # -- serialization --------------------------------------------------

    def save(self, path: str | Path) -> None:
        """One piece per line: piece<TAB>log_prob, ordered by id."""
        lines = [f"{p}\t{lp!r}" for p, lp in zip(self.pieces, self.log_probs)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, level: str) -> "SubwordVocab":
        pieces, lps = [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            piece, lp = line.split("\t")
            pieces.append(piece)
            lps.append(float(lp))
        return cls(pieces, lps, level)

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for p, lp in zip(self.pieces, self.log_probs):
            h.update(p.encode("utf-8"))
            h.update(f"{lp!r}".encode())
        return h.hexdigest()[:16]


# -- training ----------------------------------------------------------


def _char_vocab(counts: Counter, level: str) -> SubwordVocab:
    chars = sorted(c for c in counts if len(c) == 1)
    total = sum(counts[c] for c in chars)
    pieces = chars + [UNK_PIECE]
    lps = [math.log(counts[c] / total) for c in chars] + [UNK_LOG_PROB]
    return SubwordVocab(pieces, lps, level)


def _lattice_marginals(text: str, mult: float, piece_ids: dict, log_probs: np.ndarray,
                       max_len: int, counts: np.ndarray) -> float:
    """Forward-backward over all segmentations; accumulates expected counts.

    Returns the total log-likelihood of `text` (times mult is added by the
    caller).  counts is updated in place.
    """
    n = len(text)
    NEG = -math.inf
    fwd = np.full(n + 1, NEG)
    fwd[0] = 0.0
    arcs = []   # (start, end, pid)
    for end in range(1, n + 1):
        acc = []
        for start in range(max(0, end - max_len), end):
            pid = piece_ids.get(text[start:end])
            if pid is None or fwd[start] == NEG:
                continue
            arcs.append((start, end, pid))
            acc.append(fwd[start] + log_probs[pid])
        if acc:
            fwd[end] = _logsumexp(acc)
    if fwd[n] == NEG:
        raise InputError(f"unsegmentable text under candidate set: {text!r}")
    bwd = np.full(n + 1, NEG)
    bwd[n] = 0.0
    for start in range(n - 1, -1, -1):
        acc = [bwd[end] + log_probs[pid]
               for (s, end, pid) in arcs if s == start]
        if acc:
            bwd[start] = _logsumexp(acc)
    total = fwd[n]
    for start, end, pid in arcs:
        post = fwd[start] + log_probs[pid] + bwd[end] - total
        counts[pid] += mult * math.exp(post)
    return float(total)


def _logsumexp(vals) -> float:
    m = max(vals)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(v - m) for v in vals))


def _viterbi_score(text: str, piece_ids: dict, log_probs: np.ndarray, max_len: int,
                   skip_pid: int | None = None) -> float:
    """Best segmentation log-prob, optionally pretending one piece is absent."""
    n = len(text)
    NEG = -math.inf
    best = [NEG] * (n + 1)
    best[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - max_len), end):
            pid = piece_ids.get(text[start:end])
            if pid is None or pid == skip_pid or best[start] == NEG:
                continue
            score = best[start] + log_probs[pid]
            if score > best[end]:
                best[end] = score
    return best[n]


def build_vocab(corpus: list, target_size: int, level: str,
                max_piece_len: int = 8, em_rounds: int = 2,
                frequency_fallback: bool = False) -> SubwordVocab:
    """Train a unigram subword vocabulary.

    level="char" just counts characters.  Otherwise: seed candidates from
    frequent substrings, run EM over the segmentation lattice, then prune
    the pieces whose removal costs the least likelihood until at most
    target_size remain.  With frequency_fallback=True the EM/pruning loop
    is replaced by plain frequency scoring (faster, less faithful).
    """
    if not corpus:
        raise InputError("empty corpus")
    text_counts = Counter(corpus)
    char_counts = Counter()
    for text, mult in text_counts.items():
        for ch in text:
            char_counts[ch] += mult
    alphabet = sorted(char_counts)
    if target_size < len(alphabet) + 1:
        raise ConfigError(
            f"target_size {target_size} below alphabet size {len(alphabet)} (+unk)")
    if level == "char":
        return _char_vocab(char_counts, level)

    # Candidate pieces: all substrings up to max_piece_len seen at least
    # twice, capped by count*length score; chars are always kept.
    sub_counts = Counter()
    for text, mult in text_counts.items():
        n = len(text)
        for i in range(n):
            for j in range(i + 1, min(i + max_piece_len, n) + 1):
                sub_counts[text[i:j]] += mult
    multi = [(s, c) for s, c in sub_counts.items() if len(s) > 1 and c >= 2]
    multi.sort(key=lambda sc: (-sc[1] * len(sc[0]), sc[0]))
    cap = max(4 * target_size, 64)
    pieces = list(alphabet) + [s for s, _ in multi[:cap]]

    if frequency_fallback:
        keep = set(alphabet)
        ranked = sorted((p for p in pieces if len(p) > 1),
                        key=lambda p: (-sub_counts[p] * len(p), p))
        for p in ranked:
            if len(keep) >= target_size - 1:
                break
            keep.add(p)
        kept = sorted(keep, key=lambda p: (len(p), p))
        tot = sum(sub_counts[p] for p in kept)
        lps = [math.log(sub_counts[p] / tot) for p in kept]
        return SubwordVocab(kept + [UNK_PIECE], lps + [UNK_LOG_PROB], level)

    piece_ids = {p: i for i, p in enumerate(pieces)}
    init = np.array([sub_counts[p] if len(p) > 1 else char_counts[p] for p in pieces],
                    dtype=np.float64)
    log_probs = np.log(init / init.sum())

    def run_em(rounds: int):
        nonlocal log_probs
        for _ in range(rounds):
            counts = np.zeros(len(pieces))
            for text, mult in text_counts.items():
                _lattice_marginals(text, mult, piece_ids, log_probs, max_piece_len, counts)
            counts = np.maximum(counts, 1e-12)
            log_probs = np.log(counts / counts.sum())
        return counts

    counts = run_em(em_rounds)

    # Prune in batches of ~20% until the target fits (unk reserves a slot).
    budget = target_size - 1
    while len(pieces) > budget:
        removable = [i for i, p in enumerate(pieces) if len(p) > 1]
        if len(pieces) - len(removable) > budget:
            raise ConfigError("target_size below alphabet size after seeding")
        losses = []
        for i in removable:
            alt = _viterbi_score(pieces[i], piece_ids, log_probs, max_piece_len,
                                 skip_pid=i)
            losses.append((counts[i] * (log_probs[i] - alt), i))
        losses.sort(key=lambda li: (li[0], pieces[li[1]]))
        n_drop = min(max(1, int(0.2 * len(removable))), len(pieces) - budget)
        drop = {i for _, i in losses[:n_drop]}
        keep_idx = [i for i in range(len(pieces)) if i not in drop]
        pieces = [pieces[i] for i in keep_idx]
        piece_ids = {p: i for i, p in enumerate(pieces)}
        kept_lp = log_probs[keep_idx]
        log_probs = kept_lp - _logsumexp(list(kept_lp))
        counts = run_em(1)

    counts = run_em(1)
    order = sorted(range(len(pieces)), key=lambda i: (len(pieces[i]) > 1, pieces[i]))
    final_pieces = [pieces[i] for i in order] + [UNK_PIECE]
    final_lps = [float(log_probs[i]) for i in order] + [UNK_LOG_PROB]
    return SubwordVocab(final_pieces, final_lps, level)


def segment(text: str, vocab: SubwordVocab) -> Segmentation:
    return vocab.segment(text)


def detokenize(ids, vocab: SubwordVocab) -> str:
    return vocab.detokenize(ids)
