import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stancefusion.corpus import Corpus, CorpusError, Stance, StancePair
from stancefusion.statistical import (
    Vocabulary,
    VocabularyFormatError,
    build_vocabulary,
    idf,
    idf_vector,
    load_vocabulary,
    save_vocabulary,
    statistical_feature,
    tf_vector,
)


def corpus_from_texts(headline_body_pairs):
    pairs, bodies = [], {}
    for i, (headline, body) in enumerate(headline_body_pairs, start=1):
        bodies[i] = body
        pairs.append(StancePair(headline, i, body, Stance.DISCUSS))
    return Corpus(pairs=pairs, bodies=bodies)


class TestBuildVocabulary:
    def test_keeps_most_frequent(self):
        corpus = corpus_from_texts([("a a a", "a a b b"), ("b", "c")])
        vocab = build_vocabulary(corpus, capacity=2)
        assert set(vocab.index) == {"a", "b"}

    def test_tie_breaks_lexicographically(self):
        corpus = corpus_from_texts([("b a", "a b")])
        vocab = build_vocabulary(corpus, capacity=1)
        assert set(vocab.index) == {"a"}

    def test_capacity_larger_than_vocab(self):
        corpus = corpus_from_texts([("a b", "c")])
        vocab = build_vocabulary(corpus, capacity=10)
        assert len(vocab) == 3
        assert vocab.capacity == 10

    def test_indices_are_bijection(self):
        corpus = corpus_from_texts([("alpha beta gamma", "delta beta"), ("alpha", "beta")])
        vocab = build_vocabulary(corpus, capacity=3)
        assert sorted(vocab.index.values()) == [0, 1, 2]

    def test_capacity_reached_exactly(self):
        texts = [(f"tok{i} tok{i + 1}", f"tok{i + 2}") for i in range(0, 40, 3)]
        vocab = build_vocabulary(corpus_from_texts(texts), capacity=10)
        assert len(vocab) == 10

    def test_distinct_bodies_counted_once(self):
        # Two pairs share body 1; its tokens must count once.
        body = "shared shared shared shared"
        pairs = [
            StancePair("x", 1, body, Stance.AGREE),
            StancePair("y", 1, body, Stance.AGREE),
            StancePair("z z z", 2, "w w", Stance.AGREE),
        ]
        corpus = Corpus(pairs=pairs, bodies={1: body, 2: "w w"})
        vocab = build_vocabulary(corpus, capacity=1)
        # shared=4 beats z=3; with per-pair body counting it would be 8 anyway,
        # so check document_frequency instead: body 1 is one document.
        assert vocab.document_frequency["shared"] == 1

    def test_num_documents(self):
        corpus = corpus_from_texts([("h1", "b1"), ("h2", "b2")])
        vocab = build_vocabulary(corpus, capacity=5)
        assert vocab.num_documents == 4  # 2 headlines + 2 distinct bodies

    def test_deterministic(self):
        corpus = corpus_from_texts([("m n o p", "q r s"), ("n o", "p q")])
        assert build_vocabulary(corpus, 4) == build_vocabulary(corpus, 4)

    def test_empty_corpus(self):
        with pytest.raises(CorpusError):
            build_vocabulary(Corpus(pairs=[], bodies={}), capacity=5)

    def test_bad_capacity(self):
        with pytest.raises(ValueError):
            build_vocabulary(corpus_from_texts([("a", "b")]), capacity=0)


@pytest.fixture
def small_vocab():
    return Vocabulary(
        index={"a": 0, "b": 1},
        document_frequency={"a": 2, "b": 1},
        num_documents=3,
        capacity=2,
    )


class TestTfVector:
    def test_counts(self, small_vocab):
        assert tf_vector(["a", "a", "b"], small_vocab).tolist() == [2.0, 1.0]

    def test_all_oov(self, small_vocab):
        assert tf_vector(["x", "y"], small_vocab).tolist() == [0.0, 0.0]

    def test_length_is_capacity(self):
        vocab = Vocabulary({"a": 0}, {"a": 1}, 1, capacity=7)
        assert tf_vector(["a"], vocab).shape == (7,)

    @given(st.lists(st.sampled_from(["a", "b", "x", "y"]), max_size=50))
    def test_sum_equals_in_vocab_count(self, tokens):
        vocab = Vocabulary({"a": 0, "b": 1}, {"a": 1, "b": 1}, 2, capacity=2)
        vec = tf_vector(tokens, vocab)
        assert vec.sum() == sum(1 for t in tokens if t in vocab.index)

    @given(st.lists(st.sampled_from(["a", "b", "c"]), max_size=30))
    def test_order_invariant(self, tokens):
        vocab = Vocabulary({"a": 0, "b": 1, "c": 2}, {"a": 1, "b": 1, "c": 1}, 3, capacity=3)
        assert np.array_equal(tf_vector(tokens, vocab), tf_vector(sorted(tokens), vocab))

    @given(st.lists(st.sampled_from(["a", "b", "c", "z"]), max_size=40))
    def test_matches_bruteforce_counts(self, tokens):
        vocab = Vocabulary({"a": 0, "b": 1, "c": 2}, {"a": 1, "b": 1, "c": 1}, 3, capacity=3)
        vec = tf_vector(tokens, vocab)
        counts = Counter(tokens)
        for token, i in vocab.index.items():
            assert vec[i] == counts[token]


class TestStatisticalFeature:
    def test_concatenation_layout(self, small_vocab):
        pair = StancePair("a b", 1, "b b", Stance.AGREE)
        vec = statistical_feature(pair, small_vocab)
        assert vec.tolist() == [1.0, 1.0, 0.0, 2.0]

    def test_output_length_is_twice_capacity(self):
        vocab = Vocabulary({"a": 0}, {"a": 1}, 1, capacity=5000)
        pair = StancePair("a", 1, "a", Stance.AGREE)
        assert statistical_feature(pair, vocab).shape == (10000,)

    def test_empty_texts_zero_vector(self, small_vocab):
        pair = StancePair("", 1, "", None)
        assert not statistical_feature(pair, small_vocab).any()

    def test_halves_are_independent(self, small_vocab):
        base = StancePair("a", 1, "b", None)
        body_edit = StancePair("a", 1, "b b a", None)
        head_edit = StancePair("a a b", 1, "b", None)
        v = small_vocab.capacity
        assert np.array_equal(
            statistical_feature(base, small_vocab)[:v],
            statistical_feature(body_edit, small_vocab)[:v],
        )
        assert np.array_equal(
            statistical_feature(base, small_vocab)[v:],
            statistical_feature(head_edit, small_vocab)[v:],
        )


class TestIdf:
    def test_formula(self, small_vocab):
        assert idf(small_vocab, "a") == pytest.approx(math.log(4 / 3) + 1.0)
        assert idf(small_vocab, "b") == pytest.approx(math.log(4 / 2) + 1.0)

    def test_vector_alignment(self, small_vocab):
        vec = idf_vector(small_vocab)
        assert vec[0] == pytest.approx(idf(small_vocab, "a"))
        assert vec[1] == pytest.approx(idf(small_vocab, "b"))

    def test_positive(self, small_vocab):
        # df == num_documents is the densest possible token; idf stays >= 1.
        dense = Vocabulary({"a": 0}, {"a": 5}, 5, capacity=1)
        assert idf(dense, "a") >= 1.0


class TestVocabularySerialization:
    def test_round_trip(self, tmp_path):
        corpus = corpus_from_texts([("alpha beta beta", "gamma alpha"), ("delta", "beta")])
        vocab = build_vocabulary(corpus, capacity=3)
        path = tmp_path / "vocab.tsv"
        save_vocabulary(vocab, path)
        assert load_vocabulary(path) == vocab

    def test_header_layout(self, tmp_path):
        vocab = Vocabulary({"tok": 0}, {"tok": 4}, 9, capacity=11)
        path = tmp_path / "vocab.tsv"
        save_vocabulary(vocab, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "VOCAB1\t11\t9"
        assert lines[1] == "tok\t0\t4"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("NOTVOCAB\t1\t1\n", encoding="utf-8")
        with pytest.raises(VocabularyFormatError):
            load_vocabulary(path)

    def test_non_bijective_indices(self, tmp_path):
        path = tmp_path / "vocab.tsv"
        path.write_text("VOCAB1\t2\t1\na\t0\t1\nb\t0\t1\n", encoding="utf-8")
        with pytest.raises(VocabularyFormatError):
            load_vocabulary(path)
