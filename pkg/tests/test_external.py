import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stancefusion.corpus import Stance, StancePair
from stancefusion.external import (
    DEFAULT_REFUTING_WORDS,
    EXTERNAL_DIM,
    LexiconError,
    PolarityLexicon,
    external_features,
    load_lexicon,
    ngram_block,
    polarity,
    refuting_block,
    tfidf_cosine,
    weighted_tfidf_score,
)
from stancefusion.statistical import Vocabulary, build_vocabulary, idf
from stancefusion.text import tokenize
from test_statistical import corpus_from_texts


def make_vocab(df_map, num_documents, capacity=None):
    index = {token: i for i, token in enumerate(sorted(df_map))}
    return Vocabulary(
        index=index,
        document_frequency=dict(df_map),
        num_documents=num_documents,
        capacity=capacity or len(df_map),
    )


class TestPolarityLexicon:
    def test_default_words(self):
        lex = PolarityLexicon()
        assert len(lex.refuting_words) == 15
        assert lex.refuting_words[:3] == ("fake", "fraud", "hoax")
        assert lex.core == ("fake", "fraud", "hoax", "false", "deny", "denies")

    def test_no_duplicates_in_default(self):
        assert len(set(DEFAULT_REFUTING_WORDS)) == len(DEFAULT_REFUTING_WORDS)

    def test_duplicate_rejected(self):
        with pytest.raises(LexiconError):
            PolarityLexicon(("a", "b", "c", "d", "e", "a"))

    def test_too_short_rejected(self):
        with pytest.raises(LexiconError):
            PolarityLexicon(("a", "b"))

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "lexicon.txt"
        path.write_text(
            "# refuting words\nsham\nbunk\nmyth\nlie\nlies\nwrong\nspin\n", encoding="utf-8"
        )
        lex = load_lexicon(path)
        assert lex.core == ("sham", "bunk", "myth", "lie", "lies", "wrong")
        assert "spin" in lex.refuting_words


class TestNgramBlock:
    def test_length(self):
        pair = StancePair("led zeppelin", 1, "led zeppelin reunion", None)
        assert ngram_block(pair).shape == (40,)

    def test_identical_short_texts(self):
        text = "led zeppelin"  # 12 normalized chars, 2 tokens
        pair = StancePair(text, 1, text, None)
        block = ngram_block(pair)
        # char slots n=2..16 twice: ones while the headline still has grams.
        for slot, n in enumerate(range(2, 17)):
            expected = 1.0 if n <= len(text) else 0.0
            assert block[slot] == expected
            assert block[15 + slot] == expected
        # word slots n=2..6 twice: only the bigram slot has a query gram.
        for slot, n in enumerate(range(2, 7)):
            expected = 1.0 if n <= 2 else 0.0
            assert block[30 + slot] == expected
            assert block[35 + slot] == expected

    def test_disjoint_texts(self):
        pair = StancePair("aaaa bbbb", 1, "cccc dddd eeee", None)
        assert not ngram_block(pair).any()

    def test_char2_slot_matches_set_intersection_oracle(self):
        headline = "led zeppelin"
        body = "led zeppelin reunion contract was ripped up"
        pair = StancePair(headline, 1, body, None)

        def grams(text, n):
            s = " ".join(tokenize(text))
            return {s[i : i + n] for i in range(len(s) - n + 1)}

        expected = len(grams(headline, 2) & grams(body, 2)) / len(grams(headline, 2))
        assert ngram_block(pair)[0] == pytest.approx(expected)

    def test_early_window_uses_first_256_chars(self):
        # Headline token appears only after the 256-char window.
        filler = " ".join(["word"] * 60)  # 299 normalized chars
        pair = StancePair("zzzz", 1, filler + " zzzz", None)
        block = ngram_block(pair)
        assert block[0] > 0.0  # full-body char-2 overlap sees it
        assert block[15] == 0.0  # early window does not

    def test_short_body_early_equals_full(self):
        pair = StancePair("sun rises", 1, "the sun rises in the east", None)
        block = ngram_block(pair)
        assert np.array_equal(block[0:15], block[15:30])
        assert np.array_equal(block[30:35], block[35:40])


class TestWeightedTfidfScore:
    def test_full_containment(self):
        vocab = make_vocab({"sun": 1, "rises": 1, "east": 2}, num_documents=4)
        pair = StancePair("sun rises", 1, "the sun rises in the east", None)
        assert weighted_tfidf_score(pair, vocab) == pytest.approx(1.0)

    def test_no_overlap(self):
        vocab = make_vocab({"sun": 1, "moon": 1}, num_documents=4)
        pair = StancePair("sun", 1, "moon sets", None)
        assert weighted_tfidf_score(pair, vocab) == 0.0

    def test_empty_headline(self):
        vocab = make_vocab({"sun": 1}, num_documents=2)
        assert weighted_tfidf_score(StancePair("", 1, "sun", None), vocab) == 0.0

    def test_hand_computed_example(self):
        # Three-word headline, two words overlap; idf(w) = ln((N+1)/(df+1)) + 1.
        vocab = make_vocab({"the": 8, "plant": 3, "zeppelin": 1}, num_documents=10)
        pair = StancePair("the plant zeppelin", 1, "the plant grows tall", None)
        idf_the = math.log(11 / 9) + 1.0
        idf_plant = math.log(11 / 4) + 1.0
        idf_zeppelin = math.log(11 / 2) + 1.0
        expected = (idf_the + idf_plant) / (idf_the + idf_plant + idf_zeppelin)
        assert weighted_tfidf_score(pair, vocab) == pytest.approx(expected, abs=1e-12)
        assert weighted_tfidf_score(pair, vocab) == pytest.approx(0.54288, abs=1e-4)

    def test_oov_headline_words_ignored(self):
        vocab = make_vocab({"plant": 3}, num_documents=10)
        pair = StancePair("the plant zeppelin", 1, "plant", None)
        assert weighted_tfidf_score(pair, vocab) == pytest.approx(1.0)

    @given(st.text(max_size=60), st.text(max_size=60))
    @settings(max_examples=50)
    def test_bounds(self, headline, body):
        vocab = make_vocab({"a": 1, "b": 2, "the": 3}, num_documents=5)
        value = weighted_tfidf_score(StancePair(headline, 1, body, None), vocab)
        assert 0.0 <= value <= 1.0


class TestTfidfCosine:
    def test_identical_texts(self):
        vocab = make_vocab({"sun": 1, "rises": 2}, num_documents=4)
        pair = StancePair("sun rises", 1, "sun rises", None)
        assert tfidf_cosine(pair, vocab) == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_vocab_usage(self):
        vocab = make_vocab({"sun": 1, "moon": 1}, num_documents=4)
        pair = StancePair("sun", 1, "moon", None)
        assert tfidf_cosine(pair, vocab) == 0.0

    def test_zero_vector_guard(self):
        vocab = make_vocab({"sun": 1}, num_documents=2)
        assert tfidf_cosine(StancePair("xyz", 1, "sun", None), vocab) == 0.0

    def test_matches_vector_arithmetic_oracle(self):
        vocab = make_vocab({"a": 1, "b": 2, "c": 3}, num_documents=6)
        pair = StancePair("a a b", 1, "a b b c", None)
        weights = {t: idf(vocab, t) for t in ("a", "b", "c")}
        hv = np.array([2 * weights["a"], 1 * weights["b"], 0.0])
        bv = np.array([1 * weights["a"], 2 * weights["b"], 1 * weights["c"]])
        expected = float(hv @ bv / (np.linalg.norm(hv) * np.linalg.norm(bv)))
        assert tfidf_cosine(pair, vocab) == pytest.approx(expected, abs=1e-12)

    @given(st.text(max_size=50), st.text(max_size=50))
    @settings(max_examples=50)
    def test_bounds(self, headline, body):
        vocab = make_vocab({"a": 1, "b": 2}, num_documents=4)
        value = tfidf_cosine(StancePair(headline, 1, body, None), vocab)
        assert 0.0 <= value <= 1.0 + 1e-12


class TestPolarity:
    def test_no_refuting_words(self):
        assert polarity(["sunny", "day"], PolarityLexicon()) == 0

    def test_single_hoax(self):
        assert polarity(["this", "is", "a", "hoax"], PolarityLexicon()) == 1

    def test_mod_two_rule(self):
        # "not a hoax" has two refuting words -> even -> 0.
        assert polarity(tokenize("not a hoax"), PolarityLexicon()) == 0

    def test_three_refuting_words(self):
        assert polarity(tokenize("not a fake hoax"), PolarityLexicon()) == 1


class TestRefutingBlock:
    def test_no_refuting_words(self):
        block = refuting_block(tokenize("plain headline"), PolarityLexicon())
        assert block.tolist() == [0.0] * 6

    def test_counts_per_core_word(self):
        block = refuting_block(tokenize("fake fake fraud"), PolarityLexicon())
        assert block.tolist() == [2.0, 1.0, 0.0, 0.0, 0.0, 0.0]

    def test_clipped_at_five(self):
        block = refuting_block(["fake"] * 9, PolarityLexicon())
        assert block[0] == 5.0

    @given(st.lists(st.sampled_from(["fake", "hoax", "deny", "news", "story"]), max_size=30))
    def test_matches_scan_oracle(self, tokens):
        lexicon = PolarityLexicon()
        block = refuting_block(tokens, lexicon)
        for i, word in enumerate(lexicon.core):
            assert block[i] == min(sum(1 for t in tokens if t == word), 5)


@pytest.fixture(scope="module")
def trained_vocab():
    corpus = corpus_from_texts(
        [
            ("sun rises over the east river", "the sun rises slowly over the east river today"),
            ("mayor denies fraud claim", "the mayor denies any fraud in the budget claim"),
            ("storm hits the harbor", "a storm hits the harbor and the market"),
        ]
    )
    return build_vocabulary(corpus, capacity=30)


class TestExternalFeatures:
    def test_length_is_fifty(self, trained_vocab):
        pair = StancePair("sun rises", 1, "the sun rises", None)
        assert external_features(pair, trained_vocab).shape == (EXTERNAL_DIM,)

    def test_empty_headline_all_zero(self, trained_vocab):
        pair = StancePair("", 1, "the sun rises over the river", None)
        assert not external_features(pair, trained_vocab).any()

    def test_equals_concatenated_blocks(self, trained_vocab):
        lexicon = PolarityLexicon()
        pair = StancePair("mayor denies fraud", 2, "the mayor denies any fraud hoax", None)
        vec = external_features(pair, trained_vocab, lexicon)
        expected = np.concatenate(
            [
                ngram_block(pair),
                [weighted_tfidf_score(pair, trained_vocab)],
                [tfidf_cosine(pair, trained_vocab)],
                [float(polarity(tokenize(pair.headline), lexicon))],
                [float(polarity(tokenize(pair.body), lexicon))],
                refuting_block(tokenize(pair.headline), lexicon),
            ]
        )
        assert np.array_equal(vec, expected)

    def test_headline_only_slots_ignore_body(self, trained_vocab):
        a = StancePair("fake mayor hoax", 1, "body one text", None)
        b = StancePair("fake mayor hoax", 1, "different body entirely denies", None)
        va = external_features(a, trained_vocab)
        vb = external_features(b, trained_vocab)
        assert va[42] == vb[42]
        assert np.array_equal(va[44:50], vb[44:50])

    def test_body_polarity_ignores_headline(self, trained_vocab):
        a = StancePair("one headline", 1, "the story is a hoax", None)
        b = StancePair("another fake headline", 1, "the story is a hoax", None)
        assert external_features(a, trained_vocab)[43] == external_features(b, trained_vocab)[43]

    def test_deterministic(self, trained_vocab):
        pair = StancePair("sun rises", 1, "the sun rises over the east river", None)
        first = external_features(pair, trained_vocab)
        second = external_features(pair, trained_vocab)
        assert np.array_equal(first, second)

    @given(headline=st.text(max_size=80), body=st.text(max_size=200))
    @settings(max_examples=60, deadline=None)
    def test_slot_ranges(self, trained_vocab, headline, body):
        vec = external_features(StancePair(headline, 1, body, None), trained_vocab)
        assert vec.shape == (EXTERNAL_DIM,)
        assert np.all(vec[0:42] >= 0.0) and np.all(vec[0:42] <= 1.0 + 1e-12)
        assert vec[42] in (0.0, 1.0)
        assert vec[43] in (0.0, 1.0)
        assert np.all(vec[44:50] >= 0.0) and np.all(vec[44:50] <= 5.0)
        assert np.array_equal(vec[44:50], np.floor(vec[44:50]))
