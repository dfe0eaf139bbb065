import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgtd.attacks import AttackConfig, homoglyph_replace, load_confusables, zero_width_insert
from mgtd.features import (
    CLEAN_SIGNATURE,
    FeatureError,
    TfIdfModel,
    bleu,
    cosine_similarity,
    edit_distance,
    homoglyph_count,
    implicit_feature_vector,
    tfidf_fit,
    tfidf_transform,
    tfidf_transform_many,
    wer,
    word_overlap_ratio,
)
from mgtd.normalizer import NormalizerConfig, default_folding_map, normalize

short_text = st.text(alphabet=st.sampled_from("abc "), max_size=8)


def brute_distance(a, b):
    """Plain recursive Levenshtein, memoized; independent of the library DP."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            rec(i - 1, j) + 1,
            rec(i, j - 1) + 1,
            rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return rec(len(a), len(b))


class TestTfIdf:
    def test_idf_of_ubiquitous_term_is_one(self):
        model = tfidf_fit(["a", "a"])
        assert model.idf[model.vocabulary["a"]] == pytest.approx(1.0)

    def test_idf_formula(self):
        model = tfidf_fit(["a b", "b"])
        assert model.idf[model.vocabulary["a"]] == pytest.approx(math.log(3 / 2) + 1, abs=1e-9)
        assert model.idf[model.vocabulary["b"]] == pytest.approx(1.0)

    def test_max_features_keeps_highest_document_frequency(self):
        model = tfidf_fit(["a b", "b"], max_features=1)
        assert set(model.vocabulary) == {"b"}

    def test_df_ties_break_lexicographically(self):
        model = tfidf_fit(["a b c"], max_features=2)
        assert set(model.vocabulary) == {"a", "b"}

    def test_out_of_vocabulary_gives_zero_vector(self):
        model = tfidf_fit(["a b", "b"])
        vec = tfidf_transform(model, "z q")
        assert vec.nnz == 0

    def test_single_term_gives_unit_coordinate(self):
        model = tfidf_fit(["a b", "b"])
        vec = tfidf_transform(model, "a a a").toarray().ravel()
        assert vec[model.vocabulary["a"]] == pytest.approx(1.0)
        assert np.linalg.norm(vec) == pytest.approx(1.0)

    def test_transform_direction(self):
        model = tfidf_fit(["a b", "b"])
        vec = tfidf_transform(model, "b b a").toarray().ravel()
        raw = np.zeros(2)
        raw[model.vocabulary["a"]] = 1 * (math.log(3 / 2) + 1)
        raw[model.vocabulary["b"]] = 2 * 1.0
        expected = raw / np.linalg.norm(raw)
        np.testing.assert_allclose(vec, expected, atol=1e-12)

    def test_empty_corpus_rejected(self):
        with pytest.raises(FeatureError):
            tfidf_fit([])

    def test_rows_are_l2_normalized(self):
        model = tfidf_fit(["a b c", "b c d", "d e"])
        mat = tfidf_transform_many(model, ["a b", "c d e", "zzz"])
        norms = np.sqrt(mat.multiply(mat).sum(axis=1)).A1
        np.testing.assert_allclose(norms[:2], 1.0, atol=1e-12)
        assert norms[2] == 0.0

    def test_record_roundtrip(self):
        model = tfidf_fit(["a b c", "b c"], max_features=10)
        clone = TfIdfModel.from_record(model.to_record())
        assert clone.vocabulary == model.vocabulary
        np.testing.assert_array_equal(clone.idf, model.idf)


class TestCosine:
    def test_identical_nonzero(self):
        assert cosine_similarity(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_known_angle(self):
        value = cosine_similarity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        assert value == pytest.approx(1 / math.sqrt(2), abs=1e-6)

    def test_zero_norm_defined_as_zero(self):
        assert cosine_similarity(np.zeros(3), np.ones(3)) == 0.0

    def test_sparse_inputs(self):
        model = tfidf_fit(["a b", "b"])
        a = tfidf_transform(model, "a b")
        assert cosine_similarity(a, a) == pytest.approx(1.0)

    @given(st.lists(st.floats(0, 10), min_size=2, max_size=6),
           st.lists(st.floats(0, 10), min_size=2, max_size=6))
    @settings(max_examples=50)
    def test_bounded_for_nonnegative_vectors(self, a, b):
        n = min(len(a), len(b))
        value = cosine_similarity(np.array(a[:n]), np.array(b[:n]))
        assert 0.0 <= value <= 1.0 + 1e-12

    @given(st.lists(st.floats(0.1, 10), min_size=2, max_size=6), st.floats(0.01, 100))
    @settings(max_examples=50)
    def test_positive_scalar_multiples_score_one(self, a, scale):
        vec = np.array(a)
        assert cosine_similarity(vec, scale * vec) == pytest.approx(1.0, abs=1e-9)


class TestEditDistance:
    def test_identical(self):
        assert edit_distance("abc", "abc") == 0

    def test_pure_insertions(self):
        assert edit_distance("", "abc") == 3

    def test_kitten_sitting(self):
        assert edit_distance("kitten", "sitting") == 3

    def test_unicode_codepoints(self):
        assert edit_distance("pay", "pаy") == 1

    @given(a=short_text, b=short_text)
    @settings(max_examples=100, deadline=None)
    def test_matches_brute_force(self, a, b):
        assert edit_distance(a, b) == brute_distance(a, b)

    @given(a=short_text, b=short_text, c=short_text)
    @settings(max_examples=60, deadline=None)
    def test_metric_properties(self, a, b, c):
        assert edit_distance(a, b) == edit_distance(b, a)
        assert (edit_distance(a, b) == 0) == (a == b)
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestWordOverlap:
    def test_identical(self):
        assert word_overlap_ratio("a b", "a b") == 1.0

    def test_disjoint(self):
        assert word_overlap_ratio("a b", "c d") == 0.0

    def test_partial(self):
        assert word_overlap_ratio("a b c", "b c d") == pytest.approx(0.5)

    def test_both_empty(self):
        assert word_overlap_ratio("", "  ") == 1.0

    @given(a=st.text(max_size=30), b=st.text(max_size=30))
    @settings(max_examples=50)
    def test_symmetric(self, a, b):
        assert word_overlap_ratio(a, b) == word_overlap_ratio(b, a)


class TestHomoglyphCount:
    folding = {"а": "a", "р": "p", "у": "y"}

    def test_pure_ascii(self):
        assert homoglyph_count("pay", self.folding) == 0

    def test_single_confusable(self):
        assert homoglyph_count("pаy", self.folding) == 1

    def test_matches_attack_replacement_count(self):
        table = load_confusables()
        folding = default_folding_map()
        text = "The pay campaign example"
        attacked = homoglyph_replace(text, AttackConfig(kind="Homoglyph", rate=1.0, seed=0))
        mapped = sum(1 for c in text if c in table)
        assert homoglyph_count(attacked.text, folding) == mapped


class TestBleu:
    def test_identical(self):
        assert bleu("a b c d e", "a b c d e") == pytest.approx(1.0)

    def test_no_unigram_overlap(self):
        assert bleu("a b c", "x y z") == 0.0

    def test_reference_oracle_value(self):
        # independent closed-form evaluation of the same smoothing scheme:
        # p1 = 3/4 unsmoothed, p2 = (2+1)/(3+1), p3 = (1+1)/(2+1),
        # p4 = (0+1)/(1+1), equal lengths so no brevity penalty
        expected = (3 / 4 * 3 / 4 * 2 / 3 * 1 / 2) ** 0.25
        assert bleu("a b c d", "a b c x") == pytest.approx(expected, abs=1e-12)

    def test_brevity_penalty_applies_to_short_candidate(self):
        value = bleu("a b c d", "a b")
        p1 = 2 / 2
        p2 = (1 + 1) / (1 + 1)
        expected = math.exp(1 - 4 / 2) * (p1 * p2 * 1.0 * 1.0) ** 0.25
        assert value == pytest.approx(expected, abs=1e-12)

    def test_both_empty(self):
        assert bleu("", "") == 1.0

    def test_one_empty(self):
        assert bleu("a", "") == 0.0

    @given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=12).map(" ".join))
    @settings(max_examples=40)
    def test_self_bleu_is_one(self, text):
        assert bleu(text, text) == pytest.approx(1.0)


class TestWer:
    def test_identical(self):
        assert wer("a b c", "a b c") == 0.0

    def test_single_substitution(self):
        assert wer("a b c", "a x c") == pytest.approx(1 / 3)

    def test_may_exceed_one(self):
        assert wer("a", "a b c") == pytest.approx(2.0)

    def test_empty_reference_conventions(self):
        assert wer("", "") == 0.0
        assert wer("", "a") == 1.0

    @given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=12).map(" ".join))
    @settings(max_examples=40)
    def test_self_wer_is_zero(self, text):
        assert wer(text, text) == 0.0


class TestImplicitVector:
    config = NormalizerConfig()

    def fitted(self, texts):
        return tfidf_fit(texts), default_folding_map()

    def test_clean_text_signature_is_exact(self):
        texts = ["The cat sat.", "A dog ran fast."]
        tfidf, folding = self.fitted(texts)
        for text in texts:
            vec = implicit_feature_vector(text, normalize(text, self.config), tfidf, folding)
            assert tuple(vec.as_array()) == CLEAN_SIGNATURE

    def test_zero_width_attacked_text(self):
        text = "the cat sat on the mat"
        attacked = zero_width_insert(text, AttackConfig(kind="ZeroWidth", rate=1.0, seed=1)).text
        tfidf, folding = self.fitted([text])
        vec = implicit_feature_vector(attacked, normalize(attacked, self.config), tfidf, folding)
        assert vec.edit_distance > 0
        assert vec.homoglyph_count == 0
        assert vec.cosine_similarity < 1.0  # raw tokens carry the zero-width bytes

    def test_homoglyph_attacked_text(self):
        text = "pay the same person"
        table = load_confusables()
        attacked = homoglyph_replace(text, AttackConfig(kind="Homoglyph", rate=1.0, seed=1)).text
        tfidf, folding = self.fitted([text])
        vec = implicit_feature_vector(attacked, normalize(attacked, self.config), tfidf, folding)
        assert vec.homoglyph_count == sum(1 for c in text if c in table)
        assert vec.cosine_similarity < 1.0

    @given(seed=st.integers(0, 2**31), kind_idx=st.integers(0, 2))
    @settings(max_examples=30, deadline=None)
    def test_structural_attacks_break_the_clean_signature(self, seed, kind_idx):
        # Homoglyph and zero-width artifacts are always removed by the
        # normalizer, and a full case swap on a long lowercase word never
        # lands back on conventional casing, so raw != normalized follows.
        from mgtd.attacks import apply_attack

        text = "The quick brown fox pays everyone the same wage today"
        kind = ("Homoglyph", "ZeroWidth", "CaseSwap")[kind_idx]
        outcome = apply_attack(text, AttackConfig(kind=kind, rate=1.0, seed=seed))
        assert outcome.edits, "rate-1 attack must touch this text"
        tfidf, folding = self.fitted([text])
        vec = implicit_feature_vector(
            outcome.text, normalize(outcome.text, self.config), tfidf, folding
        )
        assert tuple(vec.as_array()) != CLEAN_SIGNATURE

    def test_synonym_attack_output_is_normal_form(self):
        # A substituted synonym is ordinary text: normalization cannot undo
        # it, so the comparison features alone do not flag this attack. The
        # implicit classifier still sees the raw text itself.
        from mgtd.attacks import synonym_substitute

        text = "the quick fox"
        attacked = synonym_substitute(
            text, AttackConfig(kind="Synonym", rate=1.0, seed=0), lexicon={"quick": ["speedy"]}
        ).text
        tfidf, folding = self.fitted([text])
        vec = implicit_feature_vector(attacked, normalize(attacked, self.config), tfidf, folding)
        assert tuple(vec.as_array()) == CLEAN_SIGNATURE
