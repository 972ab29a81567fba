"""Word error rate and intent classification scoring."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


def edit_ops(ref: list, hyp: list) -> tuple[int, int, int]:
    """Minimum (substitutions, insertions, deletions) turning ref into hyp."""
    n, m = len(ref), len(hyp)
    # cost[i][j] holds (total, S, I, D) for ref[:i] -> hyp[:j]
    prev = [(j, 0, j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, 0, i)]
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                best = prev[j - 1]
            else:
                sub = (prev[j - 1][0] + 1, prev[j - 1][1] + 1,
                       prev[j - 1][2], prev[j - 1][3])
                ins = (cur[j - 1][0] + 1, cur[j - 1][1],
                       cur[j - 1][2] + 1, cur[j - 1][3])
                dele = (prev[j][0] + 1, prev[j][1],
                        prev[j][2], prev[j][3] + 1)
                best = min(sub, ins, dele)
            cur.append(best)
        prev = cur
    _, s, i_, d = prev[m]
    return s, i_, d


@dataclass
class WerReport:
    substitutions: int = 0
    insertions: int = 0
    deletions: int = 0
    ref_words: int = 0
    n_utterances: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        """Errors over reference words.  With no reference words at all
        the rate is the raw insertion count: 0.0 for empty hypotheses,
        the hypothesis length otherwise."""
        if self.ref_words == 0:
            return float(self.errors)
        return self.errors / self.ref_words


def wer(refs: list[str], hyps: list[str]) -> WerReport:
    if len(refs) != len(hyps):
        raise InputError("refs and hyps must pair up")
    rep = WerReport()
    for r, h in zip(refs, hyps):
        rw = r.split()
        hw = h.split()
        s, i, d = edit_ops(rw, hw)
        rep.substitutions += s
        rep.insertions += i
        rep.deletions += d
        rep.ref_words += len(rw)
        rep.n_utterances += 1
    return rep


@dataclass
class ClassScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class IntentReport:
    n: int
    accuracy: float
    macro_f1: float
    weighted_f1: float
    micro_f1: float
    per_class: dict = field(repr=False, default_factory=dict)


def intent_metrics(gold: list[int], pred: list[int], n_classes: int,
                   exclude: set | None = None) -> IntentReport:
    """Score single-label predictions.

    Classes listed in `exclude` are dropped by gold label before scoring,
    which gives the in-domain view when the catch-all and silence classes
    are excluded.  Macro averages over classes with nonzero support.
    """
    if len(gold) != len(pred):
        raise InputError("gold and pred must pair up")
    exclude = exclude or set()
    pairs = [(g, p) for g, p in zip(gold, pred) if g not in exclude]
    scores = {c: ClassScore() for c in range(n_classes)}
    correct = 0
    for g, p in pairs:
        if not 0 <= g < n_classes or not 0 <= p < n_classes:
            raise InputError("label id out of range")
        if g == p:
            scores[g].tp += 1
            correct += 1
        else:
            scores[g].fn += 1
            scores[p].fp += 1
    n = len(pairs)
    present = [c for c in range(n_classes) if scores[c].support > 0]
    macro = float(np.mean([scores[c].f1 for c in present])) if present else 0.0
    total_support = sum(scores[c].support for c in present)
    weighted = (sum(scores[c].f1 * scores[c].support for c in present)
                / total_support) if total_support else 0.0
    tp = sum(scores[c].tp for c in present)
    fp = sum(scores[c].fp for c in range(n_classes))
    fn = sum(scores[c].fn for c in present)
    micro_p = tp / (tp + fp) if tp + fp else 0.0
    micro_r = tp / (tp + fn) if tp + fn else 0.0
    micro = (2 * micro_p * micro_r / (micro_p + micro_r)
             if micro_p + micro_r else 0.0)
    return IntentReport(n=n, accuracy=correct / n if n else 0.0,
                        macro_f1=macro, weighted_f1=float(weighted),
                        micro_f1=micro, per_class=scores)
