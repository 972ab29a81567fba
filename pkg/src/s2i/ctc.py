"""Connectionist temporal classification: loss, decoding, rescoring.

The loss runs the forward-backward recursions in log space with
inclusive alphas and betas.  The gradient formula below is exact for
arbitrary per-frame score rows, normalized or not, which is what the
finite-difference tests rely on:

    d(-logP)/d lp[t,k] = -exp( LSE_{s: lab(s)=k} (a_t(s) + b_t(s))
                               - lp[t,k] - logP )

The double-counted emission inside a+b cancels against one lp subtraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import instrumentation as instr
from .errors import InputError, TargetTooLongError
from .nn import tensor as tt
from .nn.tensor import Tensor

NEG_INF = -np.inf


def min_frames(targets: list[int]) -> int:
    """Fewest frames that admit an alignment for this label sequence."""
    repeats = sum(1 for a, b in zip(targets, targets[1:]) if a == b)
    return len(targets) + repeats


def collapse(path: list[int], blank: int) -> list[int]:
    """Merge consecutive duplicates, then drop blanks."""
    out = []
    prev = None
    for p in path:
        if p != prev:
            if p != blank:
                out.append(p)
            prev = p
    return out


def _extended(targets: list[int], blank: int) -> np.ndarray:
    ext = np.full(2 * len(targets) + 1, blank, dtype=np.int64)
    ext[1::2] = targets
    return ext


def ctc_forward_backward(logprobs: np.ndarray, targets: list[int], blank: int):
    """Loss and gradient wrt the score matrix.

    Args:
        logprobs: (T, K) float array of per-frame scores.
        targets: label ids, each in [0, K) and != blank; may be empty.
        blank: blank class id.
    Returns:
        (loss, grad) with loss = -log P(targets | scores), grad (T, K).
    """
    lp = np.asarray(logprobs, dtype=np.float64)
    t_len, n_classes = lp.shape
    targets = [int(x) for x in targets]
    for y in targets:
        if not 0 <= y < n_classes or y == blank:
            raise InputError(f"target id {y} invalid for {n_classes} classes")
    if min_frames(targets) > t_len:
        raise TargetTooLongError(
            f"target needs {min_frames(targets)} frames, only {t_len} available")

    ext = _extended(targets, blank)
    s_len = len(ext)
    # skip transition s-2 -> s allowed when label differs from two back
    can_skip = np.zeros(s_len, dtype=bool)
    if s_len > 2:
        can_skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    emit = lp[:, ext]  # (T, S)

    alpha = np.full((t_len, s_len), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if s_len > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, t_len):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[can_skip] = np.logaddexp(acc[can_skip], prev[np.nonzero(can_skip)[0] - 2])
        alpha[t] = acc + emit[t]

    beta = np.full((t_len, s_len), NEG_INF)
    beta[-1, -1] = emit[-1, -1]
    if s_len > 1:
        beta[-1, -2] = emit[-1, -2]
    skip_from = np.zeros(s_len, dtype=bool)
    skip_from[:-2] = can_skip[2:] if s_len > 2 else False
    for t in range(t_len - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[skip_from] = np.logaddexp(acc[skip_from], nxt[np.nonzero(skip_from)[0] + 2])
        beta[t] = acc + emit[t]

    if s_len > 1:
        log_p = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    else:
        log_p = alpha[-1, -1]
    if not np.isfinite(log_p):
        raise InputError("no admissible alignment has finite probability")

    grad = np.zeros_like(lp)
    for t in range(t_len):
        occ = np.full(n_classes, NEG_INF)
        np.logaddexp.at(occ, ext, alpha[t] + beta[t])
        live = occ > NEG_INF
        grad[t, live] = -np.exp(occ[live] - lp[t, live] - log_p)
    return float(-log_p), grad


def ctc_loss(scores: Tensor, targets: list[int], blank: int) -> Tensor:
    """Autodiff wrapper around the forward-backward core."""
    loss, grad = ctc_forward_backward(scores.value, targets, blank)
    out = tt._make(np.asarray(loss, dtype=scores.value.dtype), (scores,), None)
    out._backward = lambda g: tt._accum(scores, float(g) * grad.astype(scores.value.dtype))
    return out


def greedy_decode(logprobs: np.ndarray, blank: int) -> list[int]:
    return collapse(list(np.argmax(logprobs, axis=1)), blank)


# -- prefix beam search -------------------------------------------------


@dataclass
class Hypothesis:
    ids: tuple
    acoustic: float
    lm: float = 0.0
    combined: float | None = field(default=None)

    def __post_init__(self):
        if self.combined is None:
            self.combined = self.acoustic


def _sort_key(ids: tuple, score: float):
    return (-score, len(ids), ids)


def prefix_beam_search(logprobs: np.ndarray, blank: int, beam_width: int,
                       prune_top_k: int | None = None) -> list[Hypothesis]:
    """Acoustic-only prefix search over collapsed label sequences.

    Per frame, each surviving prefix keeps separate mass for paths ending
    in blank vs. not; a repeated symbol only extends the prefix through
    the blank-ending mass.  Returns up to beam_width hypotheses sorted by
    total log-probability with a deterministic tie order (shorter first,
    then lexicographic).  Every considered symbol extension increments
    the shared expansion counter.
    """
    lp = np.asarray(logprobs, dtype=np.float64)
    if lp.ndim != 2:
        raise InputError("logprobs must be (T, K)")
    t_len, n_classes = lp.shape
    if not 0 <= blank < n_classes:
        raise InputError("blank id out of range")
    if beam_width < 1:
        raise InputError("beam_width must be >= 1")
    if t_len == 0:
        return [Hypothesis((), 0.0)]

    beams: dict[tuple, tuple[float, float]] = {(): (0.0, NEG_INF)}
    for t in range(t_len):
        row = lp[t]
        if prune_top_k is not None and prune_top_k < n_classes:
            cand = np.argpartition(row, -prune_top_k)[-prune_top_k:]
            symbols = [int(k) for k in cand if k != blank]
        else:
            symbols = [k for k in range(n_classes) if k != blank]
        nxt: dict[tuple, list[float]] = {}

        def cell(prefix):
            c = nxt.get(prefix)
            if c is None:
                c = [NEG_INF, NEG_INF]
                nxt[prefix] = c
            return c

        for prefix, (pb, pnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            c = cell(prefix)
            c[0] = np.logaddexp(c[0], total + row[blank])
            if prefix:
                c[1] = np.logaddexp(c[1], pnb + row[prefix[-1]])
            for k in symbols:
                instr.bump(instr.BEAM_EXPANSIONS)
                if prefix and k == prefix[-1]:
                    contrib = pb + row[k]
                else:
                    contrib = total + row[k]
                if contrib == NEG_INF:
                    continue
                c2 = cell(prefix + (k,))
                c2[1] = np.logaddexp(c2[1], contrib)

        ranked = sorted(
            nxt.items(),
            key=lambda kv: _sort_key(kv[0], np.logaddexp(kv[1][0], kv[1][1])))
        beams = {p: (c[0], c[1]) for p, c in ranked[:beam_width]}

    hyps = [Hypothesis(p, float(np.logaddexp(pb, pnb)))
            for p, (pb, pnb) in beams.items()]
    hyps.sort(key=lambda h: _sort_key(h.ids, h.acoustic))
    return hyps


def rerank(hyps: list[Hypothesis], lm=None, lm_weight: float = 0.5,
           length_weight: float = 0.0) -> list[Hypothesis]:
    """Combine acoustic, language-model and length scores.

    combined = acoustic + lm_weight * lm + length_weight * len(ids).
    Ties break toward the shorter, then lexicographically smaller ids.
    """
    out = []
    for h in hyps:
        lm_term = lm.sequence_log_prob(list(h.ids)) if lm is not None else 0.0
        combined = h.acoustic + lm_weight * lm_term + length_weight * len(h.ids)
        out.append(Hypothesis(h.ids, h.acoustic, lm_term, combined))
    out.sort(key=lambda h: _sort_key(h.ids, h.combined))
    return out
