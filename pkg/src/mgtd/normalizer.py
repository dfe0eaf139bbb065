"""Adversarial preprocessing: map possibly-attacked text to a cleaned form.

Stages run in a fixed order — zero-width stripping, homoglyph folding, case
repair, optional spelling repair, whitespace collapse — because structural
artifacts must be gone before any dictionary lookup can succeed. The full
pipeline is idempotent.
"""

from __future__ import annotations

import functools
import re
from collections import Counter
from dataclasses import dataclass

from .corpus import word_tokenize
from .attacks import load_confusables

ZERO_WIDTH_CHARS = "​‌‍﻿"
_ZERO_WIDTH_RE = re.compile(f"[{ZERO_WIDTH_CHARS}]")
_AFFIX_RE = re.compile(r"^([\W_]*)(.*?)([\W_]*)$", re.DOTALL)


class NormalizeError(ValueError):
    """Raised for unusable normalizer configurations."""


def invert_confusables(table: dict[str, str]) -> dict[str, str]:
    """Folding map: each replacement code point back to its Latin source."""
    folding: dict[str, str] = {}
    for src, dst in table.items():
        if dst in folding:
            raise NormalizeError(f"table is not injective: {dst!r} has two sources")
        folding[dst] = src
    return folding


@functools.cache
def default_folding_map() -> dict[str, str]:
    return invert_confusables(load_confusables())


@functools.cache
def _default_translation() -> dict[int, str]:
    return {ord(k): v for k, v in default_folding_map().items()}


def build_dictionary(texts, size: int = 20000) -> frozenset[str]:
    """The ``size`` most frequent alphabetic words, lowercased.

    Ties are broken lexicographically so the result is reproducible.
    """
    counts: Counter[str] = Counter()
    for text in texts:
        for token in word_tokenize(text):
            core = _AFFIX_RE.match(token).group(2)
            if core.isalpha():
                counts[core.lower()] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return frozenset(w for w, _ in ranked[:size])


@dataclass(frozen=True)
class NormalizerConfig:
    fold_homoglyphs: bool = True
    strip_zero_width: bool = True
    repair_case: bool = True
    repair_spelling: bool = False
    dictionary: frozenset[str] | None = None

    def __post_init__(self):
        if not (
            self.fold_homoglyphs
            or self.strip_zero_width
            or self.repair_case
            or self.repair_spelling
        ):
            raise NormalizeError("at least one normalization stage must be enabled")
        if self.repair_spelling and not self.dictionary:
            raise NormalizeError("repair_spelling requires a dictionary")


@functools.lru_cache(maxsize=8)
def _dictionary_alphabet(dictionary: frozenset[str]) -> str:
    return "".join(sorted({c for w in dictionary for c in w}))


def _repair_case(core: str) -> str:
    if not any(c.isupper() for c in core[1:]):
        return core
    if core.isupper() and len(core) <= 4:
        return core  # short all-caps words pass as acronyms
    return core.lower()


def _spelling_candidates(word: str, alphabet: str):
    for i in range(len(word)):
        yield word[:i] + word[i + 1 :]
    for i in range(len(word) + 1):
        for c in alphabet:
            yield word[:i] + c + word[i:]
    for i in range(len(word)):
        for c in alphabet:
            if c != word[i]:
                yield word[:i] + c + word[i + 1 :]


def _repair_spelling(core: str, dictionary: frozenset[str], alphabet: str) -> str:
    if not core.isalpha():
        return core
    lowered = core.lower()
    if lowered in dictionary:
        return core
    hits = {cand for cand in _spelling_candidates(lowered, alphabet) if cand in dictionary}
    if len(hits) != 1:
        return core  # nothing to do unless the distance-1 neighbor is unique
    repaired = next(iter(hits))
    if core[:1].isupper():
        repaired = repaired[:1].upper() + repaired[1:]
    return repaired


def normalize(text: str, config: NormalizerConfig) -> str:
    """Cleaned form of ``text`` under the configured stages.

    Idempotent: normalizing a normalized string is a no-op. Equal raw and
    normalized text is the clean-text signal downstream features rely on.
    """
    if config.strip_zero_width:
        text = _ZERO_WIDTH_RE.sub("", text)
    if config.fold_homoglyphs:
        text = text.translate(_default_translation())
    tokens = word_tokenize(text)
    if config.repair_case or config.repair_spelling:
        alphabet = _dictionary_alphabet(config.dictionary) if config.repair_spelling else ""
        repaired = []
        for token in tokens:
            prefix, core, suffix = _AFFIX_RE.match(token).groups()
            if core:
                if config.repair_case:
                    core = _repair_case(core)
                if config.repair_spelling:
                    core = _repair_spelling(core, config.dictionary, alphabet)
            repaired.append(prefix + core + suffix)
        tokens = repaired
    return " ".join(tokens)
