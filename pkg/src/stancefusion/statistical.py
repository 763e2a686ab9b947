"""Frequency-capped unigram vocabulary and raw term-frequency vectors.

The statistical branch of the classifier consumes the concatenation of two
TF vectors (headline, then body) over a single shared vocabulary built from
the training split only. Counts are raw term frequencies; IDF weighting is
used only by the hand-crafted feature block.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, CorpusError, StancePair
from .text import tokenize

DEFAULT_CAPACITY = 5000
VOCAB_MAGIC = "VOCAB1"


class VocabularyFormatError(ValueError):
    """Vocabulary file does not match the expected layout."""


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-index map with document frequencies, frozen after build.

    ``capacity`` is the vector width; ``index`` may be smaller when the
    corpus has fewer distinct tokens.
    """

    index: dict[str, int]
    document_frequency: dict[str, int]
    num_documents: int
    capacity: int

    def __len__(self) -> int:
        return len(self.index)


def build_vocabulary(corpus: Corpus, capacity: int = DEFAULT_CAPACITY) -> Vocabulary:
    """Select the ``capacity`` most frequent tokens over headlines and bodies.

    Every pair's headline counts as one document; every distinct body counts
    as one document (bodies shared by many pairs are not double counted).
    Ties at the frequency cutoff break lexicographically, so two builds of
    the same corpus are identical.
    """
    if capacity < 1:
        raise ValueError(f"capacity must be >= 1, got {capacity}")
    if not corpus.pairs:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    documents = [tokenize(p.headline) for p in corpus.pairs]
    documents += [tokenize(corpus.bodies[i]) for i in sorted({p.body_id for p in corpus.pairs})]
    term_counts: Counter = Counter()
    doc_freq: Counter = Counter()
    for doc in documents:
        term_counts.update(doc)
        doc_freq.update(set(doc))
    ranked = sorted(term_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:capacity]
    index = {token: i for i, (token, _) in enumerate(ranked)}
    return Vocabulary(
        index=index,
        document_frequency={token: doc_freq[token] for token in index},
        num_documents=len(documents),
        capacity=capacity,
    )


def tf_vector(tokens: list[str], vocab: Vocabulary) -> np.ndarray:
    """Raw term-frequency vector of width ``vocab.capacity``; OOV tokens are dropped."""
    vec = np.zeros(vocab.capacity, dtype=np.float64)
    for token in tokens:
        idx = vocab.index.get(token)
        if idx is not None:
            vec[idx] += 1.0
    return vec


def statistical_feature(pair: StancePair, vocab: Vocabulary) -> np.ndarray:
    """Headline TF vector followed by body TF vector (length 2 * capacity)."""
    return np.concatenate(
        [tf_vector(tokenize(pair.headline), vocab), tf_vector(tokenize(pair.body), vocab)]
    )


def idf(vocab: Vocabulary, token: str) -> float:
    """Smoothed inverse document frequency: ln((N + 1) / (df + 1)) + 1."""
    df = vocab.document_frequency.get(token, 0)
    return math.log((vocab.num_documents + 1) / (df + 1)) + 1.0


def idf_vector(vocab: Vocabulary) -> np.ndarray:
    """IDF weights aligned with the vocabulary indices (zeros past ``len(vocab)``)."""
    out = np.zeros(vocab.capacity, dtype=np.float64)
    for token, i in vocab.index.items():
        out[i] = idf(vocab, token)
    return out


def save_vocabulary(vocab: Vocabulary, path) -> None:
    """Write the TSV layout: header line, then one ``token<TAB>index<TAB>df`` row per token."""
    lines = [f"{VOCAB_MAGIC}\t{vocab.capacity}\t{vocab.num_documents}"]
    for token, i in sorted(vocab.index.items(), key=lambda kv: kv[1]):
        lines.append(f"{token}\t{i}\t{vocab.document_frequency[token]}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise VocabularyFormatError(f"{path}: empty vocabulary file")
    header = lines[0].split("\t")
    if len(header) != 3 or header[0] != VOCAB_MAGIC:
        raise VocabularyFormatError(f"{path}: bad header {lines[0]!r}")
    capacity, num_documents = int(header[1]), int(header[2])
    index: dict[str, int] = {}
    document_frequency: dict[str, int] = {}
    for line in lines[1:]:
        parts = line.split("\t")
        if len(parts) != 3:
            raise VocabularyFormatError(f"{path}: bad record {line!r}")
        token, idx, df = parts[0], int(parts[1]), int(parts[2])
        if token in index:
            raise VocabularyFormatError(f"{path}: duplicate token {token!r}")
        index[token] = idx
        document_frequency[token] = df
    if sorted(index.values()) != list(range(len(index))):
        raise VocabularyFormatError(f"{path}: indices are not a bijection onto [0, {len(index)})")
    if len(index) > capacity:
        raise VocabularyFormatError(f"{path}: {len(index)} tokens exceed capacity {capacity}")
    return Vocabulary(
        index=index,
        document_frequency=document_frequency,
        num_documents=num_documents,
        capacity=capacity,
    )
