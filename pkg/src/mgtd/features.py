"""Text vectorization and raw-vs-normalized comparison features.

The TF-IDF vectorizer uses smoothed idf, ``ln((1 + N) / (1 + df)) + 1``, and
L2-normalized rows. The six comparative features (cosine similarity, edit
distance, word-overlap ratio, homoglyph count, BLEU, WER) quantify how far a
text moved under normalization; clean text scores exactly (1, 0, 1, 0, 1, 0).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .corpus import word_tokenize

IMPLICIT_FEATURE_NAMES = (
    "cosine_similarity",
    "edit_distance",
    "word_overlap_ratio",
    "homoglyph_count",
    "bleu",
    "wer",
)

CLEAN_SIGNATURE = (1.0, 0.0, 1.0, 0.0, 1.0, 0.0)


class FeatureError(ValueError):
    """Raised for unusable feature-extraction inputs."""


# ---------------------------------------------------------------------------
# TF-IDF
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: dict[str, int]  # dense indices 0..V-1
    idf: np.ndarray
    max_features: int
    lowercase: bool = True

    def terms_of(self, text: str) -> list[str]:
        tokens = word_tokenize(text)
        return [t.lower() for t in tokens] if self.lowercase else tokens

    def to_record(self) -> dict:
        terms = sorted(self.vocabulary, key=self.vocabulary.get)
        return {
            "vocabulary": terms,
            "idf": [float(x) for x in self.idf],
            "settings": {"max_features": self.max_features, "lowercase": self.lowercase},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TfIdfModel":
        vocab = {term: i for i, term in enumerate(rec["vocabulary"])}
        settings = rec["settings"]
        return cls(
            vocabulary=vocab,
            idf=np.asarray(rec["idf"], dtype=np.float64),
            max_features=settings["max_features"],
            lowercase=settings["lowercase"],
        )


def tfidf_fit(corpus, max_features: int = 50000, lowercase: bool = True) -> TfIdfModel:
    """Fit vocabulary and idf weights on a corpus of texts.

    The vocabulary keeps the ``max_features`` terms with the highest document
    frequency (ties broken lexicographically); indices follow sorted term
    order so refitting the same corpus is reproducible.
    """
    texts = list(corpus)
    if not texts:
        raise FeatureError("cannot fit TF-IDF on an empty corpus")
    df: Counter[str] = Counter()
    for text in texts:
        tokens = word_tokenize(text)
        if lowercase:
            tokens = [t.lower() for t in tokens]
        df.update(set(tokens))
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:max_features]
    vocabulary = {term: i for i, term in enumerate(sorted(t for t, _ in ranked))}
    n = len(texts)
    idf = np.zeros(len(vocabulary))
    for term, i in vocabulary.items():
        idf[i] = math.log((1 + n) / (1 + df[term])) + 1.0
    return TfIdfModel(vocabulary=vocabulary, idf=idf, max_features=max_features, lowercase=lowercase)


def tfidf_transform_many(model: TfIdfModel, texts) -> sp.csr_matrix:
    """L2-normalized TF-IDF rows; out-of-vocabulary terms are ignored."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    vocab = model.vocabulary
    for text in texts:
        counts = Counter(model.terms_of(text))
        row = sorted((vocab[t], c) for t, c in counts.items() if t in vocab)
        for idx, count in row:
            indices.append(idx)
            data.append(count * model.idf[idx])
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(indptr) - 1, len(vocab)),
    )
    norms = np.sqrt(mat.multiply(mat).sum(axis=1)).A1
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.diags(scale) @ mat


def tfidf_transform(model: TfIdfModel, text: str) -> sp.csr_matrix:
    """Single-text transform: a 1-by-V L2-normalized sparse row."""
    return tfidf_transform_many(model, [text])


# ---------------------------------------------------------------------------
# Comparison features
# ---------------------------------------------------------------------------


def cosine_similarity(a, b) -> float:
    """a.b / (|a||b|), 0.0 when either vector has zero norm."""
    if sp.issparse(a) or sp.issparse(b):
        a, b = sp.csr_matrix(a), sp.csr_matrix(b)
        dot = a.multiply(b).sum()
        na = math.sqrt(a.multiply(a).sum())
        nb = math.sqrt(b.multiply(b).sum())
    else:
        a = np.asarray(a, dtype=np.float64).ravel()
        b = np.asarray(b, dtype=np.float64).ravel()
        dot = float(a @ b)
        na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(dot / (na * nb))


def _levenshtein(a: np.ndarray, b: np.ndarray) -> int:
    # Row-wise DP; the inner insertion recurrence cur[j] = min(t[j], cur[j-1]+1)
    # is closed by a running-minimum scan over (value - index).
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)
    m = len(b)
    pos = np.arange(m + 1)
    prev = pos.astype(np.float64)
    for i, ch in enumerate(a, start=1):
        t = np.minimum(prev[1:] + 1.0, prev[:-1] + (b != ch))
        prev = np.minimum.accumulate(np.concatenate(([float(i)], t)) - pos) + pos
    return int(prev[-1])


def _encode_codepoints(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over code points (unit-cost edits)."""
    if a == b:
        return 0
    return _levenshtein(_encode_codepoints(a), _encode_codepoints(b))


def _token_distance(a_tokens: list[str], b_tokens: list[str]) -> int:
    ids: dict[str, int] = {}
    for t in a_tokens + b_tokens:
        ids.setdefault(t, len(ids))
    enc_a = np.asarray([ids[t] for t in a_tokens], dtype=np.int64)
    enc_b = np.asarray([ids[t] for t in b_tokens], dtype=np.int64)
    return _levenshtein(enc_a, enc_b)


def word_overlap_ratio(a: str, b: str) -> float:
    """Jaccard overlap of lowercased word-token sets; 1.0 for two empties."""
    wa = {t.lower() for t in word_tokenize(a)}
    wb = {t.lower() for t in word_tokenize(b)}
    if not wa and not wb:
        return 1.0
    return len(wa & wb) / len(wa | wb)


def homoglyph_count(text: str, folding: dict[str, str]) -> int:
    """Number of code points that the folding map would rewrite."""
    return sum(1 for c in text if c in folding)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(reference: str, candidate: str) -> float:
    """Single-pair BLEU over n = 1..4 with uniform weights.

    Precisions are clipped; orders n >= 2 get add-one smoothing so short
    texts do not collapse to zero. The brevity penalty applies only when the
    candidate is the shorter side.
    """
    ref = word_tokenize(reference)
    cand = word_tokenize(candidate)
    if not ref and not cand:
        return 1.0
    if not ref or not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += 0.25 * math.log(precision)
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum)


def wer(reference: str, hypothesis: str) -> float:
    """Word-level Levenshtein distance over the reference word count."""
    ref = word_tokenize(reference)
    hyp = word_tokenize(hypothesis)
    if not ref:
        return 0.0 if not hyp else 1.0
    return _token_distance(ref, hyp) / len(ref)


@dataclass(frozen=True)
class ImplicitFeatures:
    """The six raw-vs-normalized comparison features."""

    cosine_similarity: float
    edit_distance: int
    word_overlap_ratio: float
    homoglyph_count: int
    bleu: float
    wer: float

    def as_array(self) -> np.ndarray:
        return np.asarray(
            [
                self.cosine_similarity,
                float(self.edit_distance),
                self.word_overlap_ratio,
                float(self.homoglyph_count),
                self.bleu,
                self.wer,
            ]
        )


def implicit_feature_vector(
    raw: str, normalized: str, tfidf: TfIdfModel, folding: dict[str, str]
) -> ImplicitFeatures:
    """Compare a raw text against its normalized form.

    Raw text is the reference side for BLEU and WER. Identical strings score
    cosine 1.0 outright (an all-out-of-vocabulary text would otherwise score
    0 against itself, which is the wrong signal for untouched input).
    """
    if raw == normalized:
        cos = 1.0
    else:
        cos = cosine_similarity(tfidf_transform(tfidf, raw), tfidf_transform(tfidf, normalized))
    return ImplicitFeatures(
        cosine_similarity=cos,
        edit_distance=edit_distance(raw, normalized),
        word_overlap_ratio=word_overlap_ratio(raw, normalized),
        homoglyph_count=homoglyph_count(raw, folding),
        bleu=bleu(raw, normalized),
        wer=wer(raw, normalized),
    )
