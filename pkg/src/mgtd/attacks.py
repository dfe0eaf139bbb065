"""Adversarial text perturbations and the 5+1 corpus-expansion protocol.

Five attack kinds: synonym substitution, misspelling, homoglyph replacement,
upper/lower case swapping, and zero-width space insertion. Every generator is
a pure function of (text, config): it emits an edit log in source-text
coordinates and builds its output by replaying that log, so the log always
reconstructs the attacked text exactly.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, replace
from importlib import resources

from .corpus import ATTACK_KINDS, Document
from .hashing import derive_seed

ZERO_WIDTH_SPACE = "​"

DEFAULT_RATES = {
    "Synonym": 0.15,
    "Misspell": 0.15,
    "CaseSwap": 0.15,
    "Homoglyph": 0.10,
    "ZeroWidth": 0.10,
}

_TOKEN_RE = re.compile(r"\S+")


class AttackError(ValueError):
    """Raised for unusable attack configurations."""


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise AttackError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise AttackError(f"rate must be in [0, 1], got {self.rate}")


@dataclass(frozen=True)
class Edit:
    """One replacement in source-text coordinates.

    ``position`` is a code-point offset into the source; ``original_unit`` is
    the replaced source slice (empty for insertions) and ``replacement_unit``
    what the attacked text carries instead.
    """

    position: int
    original_unit: str
    replacement_unit: str
    kind: str

    def to_record(self) -> dict:
        return {
            "position": self.position,
            "original_unit": self.original_unit,
            "replacement_unit": self.replacement_unit,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class AttackOutcome:
    text: str
    edits: tuple[Edit, ...]


def replay_edits(source: str, edits) -> str:
    """Apply an edit log to its source text.

    Edits must be sorted by position and non-overlapping; each edit's
    ``original_unit`` is checked against the source before substitution.
    """
    out = []
    cursor = 0
    for edit in edits:
        if edit.position < cursor:
            raise AttackError(f"edit at {edit.position} overlaps the previous edit")
        end = edit.position + len(edit.original_unit)
        if source[edit.position : end] != edit.original_unit:
            raise AttackError(
                f"edit at {edit.position} expects {edit.original_unit!r}, "
                f"source has {source[edit.position:end]!r}"
            )
        out.append(source[cursor : edit.position])
        out.append(edit.replacement_unit)
        cursor = end
    out.append(source[cursor:])
    return "".join(out)


def _outcome(source: str, edits: list[Edit]) -> AttackOutcome:
    return AttackOutcome(text=replay_edits(source, edits), edits=tuple(edits))


def _parse_lexicon(lines) -> dict[str, list[str]]:
    lexicon: dict[str, list[str]] = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, _, rest = line.partition(":")
        synonyms = [s.strip() for s in rest.split(",") if s.strip()]
        if synonyms:
            lexicon[word.strip().lower()] = synonyms
    return lexicon


def load_synonym_lexicon(path=None) -> dict[str, list[str]]:
    """Lexicon file: lines of ``word: syn1, syn2, ...`` with lowercase keys."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            return _parse_lexicon(fh)
    text = resources.files("mgtd").joinpath("data/synonyms.txt").read_text("utf-8")
    return _parse_lexicon(text.splitlines())


def _parse_confusables(lines) -> dict[str, str]:
    table: dict[str, str] = {}
    seen_targets = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise AttackError(f"confusables line {lineno}: expected two hex code points")
        try:
            src, dst = (chr(int(f, 16)) for f in fields)
        except ValueError as exc:
            raise AttackError(f"confusables line {lineno}: {exc}") from exc
        if dst in seen_targets:
            raise AttackError(f"confusables line {lineno}: duplicate replacement target")
        seen_targets.add(dst)
        table[src] = dst
    return table


def load_confusables(path=None) -> dict[str, str]:
    """Confusables file: lines of ``<source hex> <replacement hex>``."""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            return _parse_confusables(fh)
    text = resources.files("mgtd").joinpath("data/confusables.txt").read_text("utf-8")
    return _parse_confusables(text.splitlines())


def _match_capitalization(template: str, word: str) -> str:
    if template[:1].isupper():
        return word[:1].upper() + word[1:]
    return word


def synonym_substitute(text: str, config: AttackConfig, lexicon=None) -> AttackOutcome:
    """Replace in-lexicon words by a uniformly chosen synonym.

    Lookup is case-insensitive; a replaced word keeps its first-letter
    capitalization. Words absent from the lexicon are untouched.
    """
    if lexicon is None:
        lexicon = load_synonym_lexicon()
    if not lexicon:
        raise AttackError("synonym lexicon is empty; the attack would be a no-op")
    rng = random.Random(config.seed)
    edits = []
    for match in _TOKEN_RE.finditer(text):
        word = match.group()
        synonyms = lexicon.get(word.lower())
        if not synonyms:
            continue
        if rng.random() >= config.rate:
            continue
        replacement = _match_capitalization(word, synonyms[rng.randrange(len(synonyms))])
        if replacement != word:
            edits.append(Edit(match.start(), word, replacement, "Synonym"))
    return _outcome(text, edits)


def _misspell_word(word: str, rng: random.Random) -> str:
    # Candidate edits all sit at Levenshtein distance exactly 1; swapping
    # equal adjacent characters would be a no-op, so those pairs are skipped.
    transposable = [i for i in range(len(word) - 1) if word[i] != word[i + 1]]
    kinds = ["delete", "duplicate"] + (["transpose"] if transposable else [])
    kind = kinds[rng.randrange(len(kinds))]
    if kind == "transpose":
        i = transposable[rng.randrange(len(transposable))]
        return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
    i = rng.randrange(len(word))
    if kind == "delete":
        return word[:i] + word[i + 1 :]
    return word[:i] + word[i] + word[i:]


def misspell(text: str, config: AttackConfig) -> AttackOutcome:
    """Corrupt words of length >= 4 with one transpose/delete/duplicate edit."""
    rng = random.Random(config.seed)
    edits = []
    for match in _TOKEN_RE.finditer(text):
        word = match.group()
        if len(word) < 4:
            continue
        if rng.random() >= config.rate:
            continue
        corrupted = _misspell_word(word, rng)
        edits.append(Edit(match.start(), word, corrupted, "Misspell"))
    return _outcome(text, edits)


def homoglyph_replace(text: str, config: AttackConfig, table=None) -> AttackOutcome:
    """Swap characters for their confusable lookalikes."""
    if table is None:
        table = load_confusables()
    rng = random.Random(config.seed)
    edits = []
    for pos, char in enumerate(text):
        confusable = table.get(char)
        if confusable is None:
            continue
        if rng.random() >= config.rate:
            continue
        edits.append(Edit(pos, char, confusable, "Homoglyph"))
    return _outcome(text, edits)


def case_swap(text: str, config: AttackConfig) -> AttackOutcome:
    """Flip the case of alphabetic characters."""
    rng = random.Random(config.seed)
    edits = []
    for pos, char in enumerate(text):
        if not char.isalpha():
            continue
        if rng.random() >= config.rate:
            continue
        flipped = char.swapcase()
        if flipped != char:
            edits.append(Edit(pos, char, flipped, "CaseSwap"))
    return _outcome(text, edits)


def zero_width_insert(text: str, config: AttackConfig) -> AttackOutcome:
    """Insert U+200B into gaps between adjacent non-whitespace characters."""
    rng = random.Random(config.seed)
    edits = []
    for pos in range(1, len(text)):
        if text[pos - 1].isspace() or text[pos].isspace():
            continue
        if rng.random() >= config.rate:
            continue
        edits.append(Edit(pos, "", ZERO_WIDTH_SPACE, "ZeroWidth"))
    return _outcome(text, edits)


_GENERATORS = {
    "Synonym": synonym_substitute,
    "Misspell": misspell,
    "Homoglyph": homoglyph_replace,
    "CaseSwap": case_swap,
    "ZeroWidth": zero_width_insert,
}


def apply_attack(text: str, config: AttackConfig, lexicon=None, table=None) -> AttackOutcome:
    """Run the generator named by ``config.kind``."""
    if config.kind == "Synonym":
        return synonym_substitute(text, config, lexicon=lexicon)
    if config.kind == "Homoglyph":
        return homoglyph_replace(text, config, table=table)
    return _GENERATORS[config.kind](text, config)


def default_attack_configs(seed: int = 0) -> list[AttackConfig]:
    return [AttackConfig(kind=k, rate=DEFAULT_RATES[k], seed=seed) for k in ATTACK_KINDS]


def expand_corpus(docs, configs, seed: int = 0, lexicon=None, table=None) -> list[Document]:
    """Produce the attacked corpus: five attacked variants plus each original.

    Output order is, per document, the untouched original followed by one
    variant per attack kind; variants inherit all labels, carry the attack
    tag, and get the kind appended to their id. Each variant's RNG seed is
    derived from (seed, document id, kind), so parallel application order
    cannot change the result.
    """
    kinds = [c.kind for c in configs]
    if sorted(kinds) != sorted(ATTACK_KINDS):
        raise AttackError(f"need each attack kind exactly once, got {kinds}")
    by_kind = {c.kind: c for c in configs}
    if lexicon is None:
        lexicon = load_synonym_lexicon()
    if table is None:
        table = load_confusables()
    expanded = []
    for doc in docs:
        expanded.append(doc)
        for kind in ATTACK_KINDS:
            config = replace(by_kind[kind], seed=derive_seed(seed, doc.id, kind))
            outcome = apply_attack(doc.text, config, lexicon=lexicon, table=table)
            expanded.append(doc.with_attack(kind, outcome.text))
    return expanded
