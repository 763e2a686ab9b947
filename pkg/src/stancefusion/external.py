"""Hand-crafted per-pair features: n-gram overlaps, IDF-weighted coverage,
TF-IDF cosine, refuting-word polarity and per-word refuting counts.

The 50 slots are laid out as:

    0-14   char n-gram overlap, headline vs full body, n = 2..16
    15-29  char n-gram overlap, headline vs first 256 normalized body chars
    30-34  word n-gram overlap, headline vs full body, n = 2..6
    35-39  word n-gram overlap, headline vs early body, n = 2..6
    40     IDF-weighted headline-word coverage of the body
    41     TF-IDF cosine similarity
    42     headline polarity (refuting-word count mod 2)
    43     body polarity
    44-49  per-word counts of the 6 core refuting words in the headline,
           clipped at 5
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import StancePair
from .statistical import Vocabulary, idf, idf_vector, tf_vector
from .text import (
    CHAR_NGRAM_MAX,
    CHAR_NGRAM_MIN,
    WORD_NGRAM_MAX,
    WORD_NGRAM_MIN,
    char_ngrams,
    normalize,
    overlap_ratio,
    tokenize,
    word_ngrams,
)

EXTERNAL_DIM = 50
EARLY_BODY_CHARS = 256
CORE_LEXICON_SIZE = 6
MAX_REFUTING_COUNT = 5

DEFAULT_REFUTING_WORDS = (
    "fake",
    "fraud",
    "hoax",
    "false",
    "deny",
    "denies",
    "not",
    "despite",
    "nope",
    "doubt",
    "doubts",
    "bogus",
    "debunk",
    "pranks",
    "retract",
)


class LexiconError(ValueError):
    """Refuting lexicon is malformed."""


@dataclass(frozen=True)
class PolarityLexicon:
    """Ordered refuting-word list; the first 6 entries form the core block."""

    refuting_words: tuple[str, ...] = DEFAULT_REFUTING_WORDS

    def __post_init__(self):
        if len(self.refuting_words) < CORE_LEXICON_SIZE:
            raise LexiconError(
                f"lexicon needs at least {CORE_LEXICON_SIZE} words, got {len(self.refuting_words)}"
            )
        if len(set(self.refuting_words)) != len(self.refuting_words):
            raise LexiconError("lexicon contains duplicate words")
        for word in self.refuting_words:
            if not word or word != word.lower() or any(ch.isspace() for ch in word):
                raise LexiconError(f"lexicon word {word!r} must be a single lowercase token")

    @property
    def core(self) -> tuple[str, ...]:
        return self.refuting_words[:CORE_LEXICON_SIZE]


def load_lexicon(path) -> PolarityLexicon:
    """One lowercase word per line; lines starting with '#' are ignored."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and not word.startswith("#"):
                words.append(word)
    return PolarityLexicon(tuple(words))


def ngram_block(pair: StancePair) -> np.ndarray:
    """The 40 overlap ratios (char full/early, word full/early), headline as query."""
    body_norm = normalize(pair.body)
    early = body_norm[:EARLY_BODY_CHARS]
    head_tokens = tokenize(pair.headline)
    body_tokens = tokenize(pair.body)
    early_tokens = tokenize(early)
    values = []
    for n in range(CHAR_NGRAM_MIN, CHAR_NGRAM_MAX + 1):
        values.append(overlap_ratio(char_ngrams(pair.headline, n), char_ngrams(body_norm, n)))
    for n in range(CHAR_NGRAM_MIN, CHAR_NGRAM_MAX + 1):
        values.append(overlap_ratio(char_ngrams(pair.headline, n), char_ngrams(early, n)))
    for n in range(WORD_NGRAM_MIN, WORD_NGRAM_MAX + 1):
        values.append(overlap_ratio(word_ngrams(head_tokens, n), word_ngrams(body_tokens, n)))
    for n in range(WORD_NGRAM_MIN, WORD_NGRAM_MAX + 1):
        values.append(overlap_ratio(word_ngrams(head_tokens, n), word_ngrams(early_tokens, n)))
    return np.array(values, dtype=np.float64)


def weighted_tfidf_score(pair: StancePair, vocab: Vocabulary) -> float:
    """IDF-weighted coverage of the headline's in-vocabulary words by the body.

    sum of idf over distinct headline words that also occur in the body,
    divided by the sum over all distinct in-vocabulary headline words.
    0.0 when the denominator is empty; always in [0, 1].
    """
    head = [t for t in sorted(set(tokenize(pair.headline))) if t in vocab.index]
    if not head:
        return 0.0
    body = set(tokenize(pair.body))
    denominator = sum(idf(vocab, t) for t in head)
    numerator = sum(idf(vocab, t) for t in head if t in body)
    return numerator / denominator if denominator > 0.0 else 0.0


def tfidf_cosine(pair: StancePair, vocab: Vocabulary) -> float:
    """Cosine of the IDF-weighted TF vectors; 0.0 when either vector is zero."""
    weights = idf_vector(vocab)
    hv = tf_vector(tokenize(pair.headline), vocab) * weights
    bv = tf_vector(tokenize(pair.body), vocab) * weights
    hn = np.linalg.norm(hv)
    bn = np.linalg.norm(bv)
    if hn == 0.0 or bn == 0.0:
        return 0.0
    return float(np.dot(hv, bv) / (hn * bn))


def polarity(tokens: list[str], lexicon: PolarityLexicon) -> int:
    """Parity of refuting-word occurrences: even count -> 0, odd -> 1."""
    refuting = set(lexicon.refuting_words)
    return sum(1 for t in tokens if t in refuting) % 2


def refuting_block(headline_tokens: list[str], lexicon: PolarityLexicon) -> np.ndarray:
    """Occurrence count of each core refuting word, clipped to [0, 5]."""
    counts = Counter(headline_tokens)
    return np.array(
        [min(counts[word], MAX_REFUTING_COUNT) for word in lexicon.core], dtype=np.float64
    )


def external_features(
    pair: StancePair, vocab: Vocabulary, lexicon: PolarityLexicon | None = None
) -> np.ndarray:
    """Concatenate all hand-crafted blocks into the 50-dimensional vector."""
    lexicon = lexicon or PolarityLexicon()
    head_tokens = tokenize(pair.headline)
    body_tokens = tokenize(pair.body)
    out = np.concatenate(
        [
            ngram_block(pair),
            [weighted_tfidf_score(pair, vocab)],
            [tfidf_cosine(pair, vocab)],
            [float(polarity(head_tokens, lexicon))],
            [float(polarity(body_tokens, lexicon))],
            refuting_block(head_tokens, lexicon),
        ]
    )
    assert out.shape == (EXTERNAL_DIM,)
    return out
