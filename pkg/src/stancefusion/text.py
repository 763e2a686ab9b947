"""Deterministic text normalization and n-gram extraction.

Tokenization is intentionally blunt: lowercase, keep maximal [a-z0-9] runs,
drop everything else. No stemming, no stopword removal, no Unicode
segmentation beyond ``str.lower``.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

CHAR_NGRAM_MIN, CHAR_NGRAM_MAX = 2, 16
WORD_NGRAM_MIN, WORD_NGRAM_MAX = 2, 6

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and return its maximal [a-z0-9] runs, in order."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> str:
    """Canonical form of ``text``: tokens joined by single spaces."""
    return " ".join(tokenize(text))


@dataclass
class NgramMultiset:
    """Bag of n-grams; keys are strings (char unit) or token tuples (word unit)."""

    n: int
    unit: str
    grams: Counter = field(default_factory=Counter)

    def total(self) -> int:
        return sum(self.grams.values())


def char_ngrams(text: str, n: int) -> NgramMultiset:
    """Character n-grams of the normalized text, sliding window of stride 1."""
    if not CHAR_NGRAM_MIN <= n <= CHAR_NGRAM_MAX:
        raise ValueError(
            f"character n-gram size must be in [{CHAR_NGRAM_MIN}, {CHAR_NGRAM_MAX}], got {n}"
        )
    s = normalize(text)
    return NgramMultiset(n, "char", Counter(s[i : i + n] for i in range(len(s) - n + 1)))


def word_ngrams(tokens: list[str], n: int) -> NgramMultiset:
    """Contiguous token n-grams, sliding window of stride 1."""
    if not WORD_NGRAM_MIN <= n <= WORD_NGRAM_MAX:
        raise ValueError(
            f"word n-gram size must be in [{WORD_NGRAM_MIN}, {WORD_NGRAM_MAX}], got {n}"
        )
    return NgramMultiset(
        n, "word", Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    )


def overlap_ratio(query: NgramMultiset, target: NgramMultiset) -> float:
    """Fraction of the query's distinct grams that also occur in the target.

    Normalized by the query side so the value is independent of target
    length and stays in [0, 1]. An empty query yields 0.0.
    """
    if query.n != target.n or query.unit != target.unit:
        raise ValueError(
            f"cannot compare {query.unit} {query.n}-grams with {target.unit} {target.n}-grams"
        )
    if not query.grams:
        return 0.0
    matched = sum(1 for gram in query.grams if gram in target.grams)
    return matched / len(query.grams)
