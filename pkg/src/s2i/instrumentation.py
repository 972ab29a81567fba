"""Lightweight global counters used to assert structural claims in tests.

The intent-prediction path must never touch the beam-search decoder or the
language model, and the transliteration fallback model must only run on
table misses.  These facts are checked by snapshotting the counters around
a call rather than by mocking internals.
"""

from collections import Counter

_counters: Counter = Counter()

BEAM_EXPANSIONS = "beam.expansions"
LM_QUERIES = "lm.queries"
TRANSLIT_TABLE_HITS = "translit.table_hits"
TRANSLIT_MODEL_CALLS = "translit.model_calls"


def bump(name: str, n: int = 1) -> None:
    _counters[name] += n


def value(name: str) -> int:
    return _counters[name]


def snapshot() -> dict:
    return dict(_counters)


def reset() -> None:
    _counters.clear()
