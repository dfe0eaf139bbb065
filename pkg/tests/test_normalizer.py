import string

import pytest
from hypothesis import given, settings, strategies as st

from mgtd.attacks import AttackConfig, homoglyph_replace, load_confusables, zero_width_insert
from mgtd.normalizer import (
    NormalizeError,
    NormalizerConfig,
    build_dictionary,
    default_folding_map,
    invert_confusables,
    normalize,
)

FULL = NormalizerConfig()
ascii_words = st.lists(
    st.text(alphabet=st.sampled_from(string.ascii_letters), min_size=1, max_size=10),
    min_size=1,
    max_size=15,
).map(" ".join)


def any_config(draw_dictionary=frozenset({"hello", "world", "cat", "sat", "the"})):
    flag = st.booleans()
    return st.tuples(flag, flag, flag, flag).filter(any).map(
        lambda flags: NormalizerConfig(
            fold_homoglyphs=flags[0],
            strip_zero_width=flags[1],
            repair_case=flags[2],
            repair_spelling=flags[3],
            dictionary=draw_dictionary if flags[3] else None,
        )
    )


class TestConfig:
    def test_all_stages_disabled_rejected(self):
        with pytest.raises(NormalizeError, match="at least one"):
            NormalizerConfig(fold_homoglyphs=False, strip_zero_width=False,
                             repair_case=False, repair_spelling=False)

    def test_spelling_requires_dictionary(self):
        with pytest.raises(NormalizeError, match="dictionary"):
            NormalizerConfig(repair_spelling=True)


class TestInvertConfusables:
    def test_single_entry(self):
        assert invert_confusables({"a": "а"}) == {"а": "a"}

    def test_non_injective_rejected(self):
        with pytest.raises(NormalizeError, match="injective"):
            invert_confusables({"a": "а", "b": "а"})

    @given(text=st.text(alphabet=st.sampled_from(string.ascii_letters), max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_fold_inverts_full_rate_attack(self, text):
        attacked = homoglyph_replace(text, AttackConfig(kind="Homoglyph", rate=1.0, seed=7))
        folding = invert_confusables(load_confusables())
        folded = attacked.text.translate({ord(k): v for k, v in folding.items()})
        assert folded == text


class TestNormalize:
    def test_zero_width_strip(self):
        assert normalize("a​b", FULL) == "ab"

    def test_strips_all_zero_width_kinds(self):
        assert normalize("a​‌‍﻿b", FULL) == "ab"

    def test_confusable_fold(self):
        assert normalize("рау", FULL) == "pay"

    def test_clean_text_is_a_fixpoint(self):
        assert normalize("The cat sat.", FULL) == "The cat sat."

    def test_whitespace_collapse(self):
        assert normalize("a  b\t c\n", FULL) == "a b c"

    def test_case_repair_lowers_interior_uppercase(self):
        assert normalize("McDonald said hEllo", FULL) == "mcdonald said hello"

    def test_short_allcaps_words_survive(self):
        assert normalize("NASA and AI won", FULL) == "NASA and AI won"

    def test_long_allcaps_words_lowered(self):
        assert normalize("SHOUTED", FULL) == "shouted"

    def test_punctuation_kept_around_repaired_core(self):
        assert normalize('"McDonald!"', FULL) == '"mcdonald!"'

    def test_spelling_repair_unique_neighbor(self):
        config = NormalizerConfig(repair_spelling=True,
                                  dictionary=frozenset({"hello", "world"}))
        assert normalize("helo world", config) == "hello world"

    def test_spelling_repair_keeps_ambiguous(self):
        config = NormalizerConfig(repair_spelling=True,
                                  dictionary=frozenset({"cat", "cut", "cot"}))
        assert normalize("ct", config) == "ct"

    def test_spelling_repair_preserves_capitalization(self):
        config = NormalizerConfig(repair_spelling=True,
                                  dictionary=frozenset({"hello", "zzz"}))
        assert normalize("Helo", config) == "Hello"

    @given(text=st.text(max_size=60), config=any_config())
    @settings(max_examples=80, deadline=None)
    def test_idempotent_under_every_config(self, text, config):
        once = normalize(text, config)
        assert normalize(once, config) == once

    @given(text=st.text(max_size=60))
    @settings(max_examples=60, deadline=None)
    def test_never_increases_codepoints_without_spelling(self, text):
        assert len(normalize(text, FULL)) <= len(text)

    @given(text=ascii_words, seed=st.integers(0, 2**31), rate=st.floats(0.1, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_homoglyph_attack_round_trip(self, text, seed, rate):
        attacked = homoglyph_replace(text, AttackConfig(kind="Homoglyph", rate=rate, seed=seed))
        assert normalize(attacked.text, FULL) == normalize(text, FULL)

    @given(text=ascii_words, seed=st.integers(0, 2**31), rate=st.floats(0.1, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_zero_width_attack_round_trip(self, text, seed, rate):
        attacked = zero_width_insert(text, AttackConfig(kind="ZeroWidth", rate=rate, seed=seed))
        assert normalize(attacked.text, FULL) == normalize(text, FULL)

    def test_dictionary_words_with_conventional_casing_fixed(self):
        words = ["the", "cat", "sat", "on", "mats"]
        config = NormalizerConfig(repair_spelling=True, dictionary=frozenset(words))
        text = "The cat sat on mats."
        assert normalize(text, config) == text


class TestBuildDictionary:
    def test_top_frequency_words(self):
        texts = ["a a a b b c", "a b z9z"]
        assert build_dictionary(texts, size=2) == frozenset({"a", "b"})

    def test_skips_non_alphabetic_tokens(self):
        assert "x1" not in build_dictionary(["x1 x1 x1 word"], size=10)

    def test_ties_break_lexicographically(self):
        assert build_dictionary(["b a"], size=1) == frozenset({"a"})

    def test_folding_map_matches_attack_table(self):
        folding = default_folding_map()
        table = load_confusables()
        assert folding == {v: k for k, v in table.items()}
