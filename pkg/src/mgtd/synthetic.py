"""Synthetic desk-scale corpora for experiments and the test suite.

Detection corpora draw Human and AI documents from distinct Zipf-weighted
unigram distributions over a shared random vocabulary. Segmentation corpora
use disjoint H/M vocabularies so token identity fully determines authorship,
which makes boundary recovery measurable against a known optimum.
"""

from __future__ import annotations

import string

import numpy as np

from .corpus import Document, SegmentedDocument

GENERATORS = ("OpenAI", "Anthropic", "DeepSeek", "Llama")


def _random_words(rng, count: int, min_len: int = 4, max_len: int = 8) -> list[str]:
    letters = string.ascii_lowercase
    words = []
    seen = set()
    while len(words) < count:
        length = rng.integers(min_len, max_len + 1)
        word = "".join(letters[i] for i in rng.integers(0, len(letters), size=length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def _zipf_distribution(vocab_size: int, exponent: float = 1.1) -> np.ndarray:
    weights = 1.0 / np.arange(1, vocab_size + 1) ** exponent
    return weights / weights.sum()


def make_detection_corpus(
    n_docs: int,
    seed: int = 0,
    background_size: int = 240,
    markers_per_class: int = 30,
    marker_rate: float = 0.12,
    doc_len: tuple[int, int] = (30, 60),
    generators: bool = False,
) -> list[Document]:
    """Balanced Human/AI corpus with class-marker unigram distributions.

    Every class draws most tokens from a shared Zipf background (no class
    signal) and a ``marker_rate`` fraction from its own marker vocabulary.
    Markers are what a detector can learn, and what token-mangling attacks
    destroy, so clean accuracy is high while attacked accuracy degrades in a
    controlled way. With ``generators`` set, the AI half splits evenly across
    the four generator families, each with private markers.
    """
    rng = np.random.default_rng(seed)
    sources = ["Human"] + (list(GENERATORS) if generators else ["AI"])
    words = _random_words(rng, background_size + markers_per_class * len(sources))
    background = np.asarray(words[:background_size])
    bg_dist = _zipf_distribution(background_size)
    markers = {
        name: np.asarray(
            words[background_size + i * markers_per_class:
                  background_size + (i + 1) * markers_per_class]
        )
        for i, name in enumerate(sources)
    }
    docs = []
    for i in range(n_docs):
        name = sources[i % len(sources)]
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        from_marker = rng.random(length) < marker_rate
        tokens = rng.choice(background, size=length, p=bg_dist)
        n_markers = int(from_marker.sum())
        if n_markers:
            tokens[from_marker] = rng.choice(markers[name], size=n_markers)
        text = " ".join(tokens)
        binary = "Human" if name == "Human" else "AI"
        docs.append(
            Document(
                id=f"d{i:05d}",
                text=text,
                binary_label=binary,
                generator_label=name if generators else None,
            )
        )
    return docs


def make_fixture_lexicon(docs) -> dict[str, list[str]]:
    """Synonym lexicon over a synthetic vocabulary.

    Every word maps to a deterministic sibling token, so the substitution
    attack always lands on out-of-vocabulary replacements.
    """
    vocab = sorted({t.lower() for d in docs for t in d.text.split()})
    return {w: [w + "oid"] for w in vocab}


def make_segmentation_corpus(
    n_docs: int,
    seed: int = 0,
    vocab_size: int = 150,
    span_len: tuple[int, int] = (5, 25),
) -> list[SegmentedDocument]:
    """HM/MH/Mix corpus with disjoint human and machine vocabularies."""
    rng = np.random.default_rng(seed)
    words = _random_words(rng, 2 * vocab_size)
    h_vocab = np.asarray(words[:vocab_size])
    m_vocab = np.asarray(words[vocab_size:])
    pools = {"H": h_vocab, "M": m_vocab}
    docs = []
    for i in range(n_docs):
        r = rng.random()
        if r < 0.40:
            mix_type, span_labels = "HM", ["H", "M"]
        elif r < 0.75:
            mix_type, span_labels = "MH", ["M", "H"]
        else:
            mix_type = "Mix"
            first = "H" if rng.random() < 0.5 else "M"
            count = int(rng.integers(3, 6))
            span_labels = [("H", "M")[(("H", "M").index(first) + k) % 2] for k in range(count)]
        tokens: list[str] = []
        labels: list[str] = []
        for label in span_labels:
            length = int(rng.integers(span_len[0], span_len[1] + 1))
            tokens.extend(rng.choice(pools[label], size=length))
            labels.extend(label * length)
        docs.append(
            SegmentedDocument(
                id=f"s{i:05d}",
                tokens=tuple(tokens),
                token_labels=tuple(labels),
                mix_type=mix_type,
            )
        )
    return docs
