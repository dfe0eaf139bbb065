"""Data model, JSON-lines ingestion, tokenization and stratified splitting.

Two record schemas are supported: "detection" documents (one text plus task
labels) and "segmentation" documents (token sequences with per-token H/M
authorship labels). All types are immutable after load and safe to share
across workers.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace

from .hashing import derive_seed

BINARY_LABELS = ("Human", "AI")
GENERATOR_LABELS = ("Human", "OpenAI", "Anthropic", "DeepSeek", "Llama")
DOMAINS = ("Reddit", "News", "Wiki", "Arxiv", "QA")
ATTACK_KINDS = ("Synonym", "Misspell", "Homoglyph", "CaseSwap", "ZeroWidth")
ATTACK_TAGS = ("None",) + ATTACK_KINDS
TOKEN_LABELS = ("H", "M")
MIX_TYPES = ("HM", "MH", "Mix")


class CorpusError(ValueError):
    """Raised for malformed records or invariant violations."""


def word_tokenize(text: str) -> list[str]:
    """Split into maximal runs of non-whitespace characters."""
    return text.split()


@dataclass(frozen=True)
class Document:
    """One text sample with optional task labels."""

    id: str
    text: str
    binary_label: str | None = None
    generator_label: str | None = None
    domain: str | None = None
    attack_tag: str = "None"

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError(f"document {self.id!r}: text is empty")
        if self.binary_label is not None and self.binary_label not in BINARY_LABELS:
            raise CorpusError(f"document {self.id!r}: unknown binary_label {self.binary_label!r}")
        if self.generator_label is not None and self.generator_label not in GENERATOR_LABELS:
            raise CorpusError(
                f"document {self.id!r}: unknown generator_label {self.generator_label!r}"
            )
        if self.domain is not None and self.domain not in DOMAINS:
            raise CorpusError(f"document {self.id!r}: unknown domain {self.domain!r}")
        if self.attack_tag not in ATTACK_TAGS:
            raise CorpusError(f"document {self.id!r}: unknown attack_tag {self.attack_tag!r}")
        if self.binary_label is not None and self.generator_label is not None:
            # Human as generator and Human as binary label must agree.
            if (self.generator_label == "Human") != (self.binary_label == "Human"):
                raise CorpusError(
                    f"document {self.id!r}: generator_label {self.generator_label!r} "
                    f"conflicts with binary_label {self.binary_label!r}"
                )

    def with_attack(self, kind: str, text: str) -> "Document":
        """Copy carrying an attacked text, tagged and id-suffixed by kind."""
        return replace(self, id=f"{self.id}::{kind.lower()}", text=text, attack_tag=kind)

    def to_record(self) -> dict:
        rec = {"id": self.id, "text": self.text}
        if self.binary_label is not None:
            rec["binary_label"] = self.binary_label
        if self.generator_label is not None:
            rec["generator_label"] = self.generator_label
        if self.domain is not None:
            rec["domain"] = self.domain
        if self.attack_tag != "None":
            rec["attack_tag"] = self.attack_tag
        return rec


@dataclass(frozen=True)
class SegmentedDocument:
    """Mixed-authorship sample: word tokens with per-token H/M labels."""

    id: str
    tokens: tuple[str, ...]
    token_labels: tuple[str, ...]
    mix_type: str

    def __post_init__(self):
        if len(self.tokens) != len(self.token_labels):
            raise CorpusError(f"document {self.id!r}: tokens/labels length mismatch")
        if len(self.tokens) < 2:
            raise CorpusError(f"document {self.id!r}: needs at least 2 tokens")
        if any(l not in TOKEN_LABELS for l in self.token_labels):
            raise CorpusError(f"document {self.id!r}: token labels must be H or M")
        if self.mix_type not in MIX_TYPES:
            raise CorpusError(f"document {self.id!r}: unknown mix_type {self.mix_type!r}")
        boundaries = extract_boundaries(self.token_labels)
        kinds = [(b["from"], b["to"]) for b in boundaries]
        if self.mix_type == "HM" and kinds != [("H", "M")]:
            raise CorpusError(f"document {self.id!r}: HM requires exactly one H→M transition")
        if self.mix_type == "MH" and kinds != [("M", "H")]:
            raise CorpusError(f"document {self.id!r}: MH requires exactly one M→H transition")
        if self.mix_type == "Mix" and not kinds:
            raise CorpusError(f"document {self.id!r}: Mix requires at least one transition")

    @property
    def label_string(self) -> str:
        return "".join(self.token_labels)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "token_labels": self.label_string,
            "mix_type": self.mix_type,
        }


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint train/validation/test id sets covering the corpus."""

    train_ids: frozenset[str]
    validation_ids: frozenset[str]
    test_ids: frozenset[str]

    def part_of(self, doc_id: str) -> str:
        if doc_id in self.train_ids:
            return "train"
        if doc_id in self.validation_ids:
            return "validation"
        if doc_id in self.test_ids:
            return "test"
        raise KeyError(doc_id)

    def to_record(self) -> dict:
        return {
            "train_ids": sorted(self.train_ids),
            "validation_ids": sorted(self.validation_ids),
            "test_ids": sorted(self.test_ids),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SplitAssignment":
        return cls(
            train_ids=frozenset(rec["train_ids"]),
            validation_ids=frozenset(rec["validation_ids"]),
            test_ids=frozenset(rec["test_ids"]),
        )


def extract_boundaries(token_labels) -> list[dict]:
    """Authorship transitions in a label sequence.

    A boundary is attributed to the first token of the new span (0-based),
    so ``[H,H,M,M]`` yields ``[{"index": 2, "from": "H", "to": "M"}]`` and the
    human span is said to end at word-index 1.
    """
    labels = list(token_labels)
    if not labels:
        raise CorpusError("empty label sequence")
    out = []
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            out.append({"index": i, "from": labels[i - 1], "to": labels[i]})
    return out


def _document_from_record(rec: dict) -> Document:
    # Extra fields (e.g. pipeline-added preprocessed_text) pass through.
    if "id" not in rec or "text" not in rec:
        raise CorpusError("record must carry 'id' and 'text'")
    return Document(
        id=str(rec["id"]),
        text=rec["text"],
        binary_label=rec.get("binary_label"),
        generator_label=rec.get("generator_label"),
        domain=rec.get("domain"),
        attack_tag=rec.get("attack_tag", "None"),
    )


def _segmented_from_record(rec: dict) -> SegmentedDocument:
    if "id" not in rec:
        raise CorpusError("record must carry 'id'")
    if "tokens" in rec:
        tokens = tuple(rec["tokens"])
    elif "text" in rec:
        tokens = tuple(word_tokenize(rec["text"]))
    else:
        raise CorpusError("record must carry 'tokens' or 'text'")
    if "token_labels" not in rec:
        raise CorpusError("record must carry 'token_labels'")
    labels = tuple(rec["token_labels"])
    if "mix_type" not in rec:
        raise CorpusError("record must carry 'mix_type'")
    return SegmentedDocument(
        id=str(rec["id"]), tokens=tokens, token_labels=labels, mix_type=rec["mix_type"]
    )


def load_documents(path, schema: str = "detection"):
    """Load a JSON-lines file, validating each record.

    ``schema`` is ``"detection"`` (-> list of Document) or ``"segmentation"``
    (-> list of SegmentedDocument). Errors name the offending 1-based line.
    """
    if schema not in ("detection", "segmentation"):
        raise CorpusError(f"unknown schema {schema!r}")
    parse = _document_from_record if schema == "detection" else _segmented_from_record
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            try:
                docs.append(parse(rec))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return docs


def load_records(path) -> list[dict]:
    """Load raw JSON-lines records, reporting line numbers on parse errors."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}:{lineno}: record is not an object")
            records.append(rec)
    return records


def save_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def save_documents(docs, path) -> None:
    """Write documents as JSON-lines (inverse of :func:`load_documents`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def _largest_remainder_counts(n: int, ratios) -> list[int]:
    """Integer split sizes for one class: floors plus largest-remainder top-up.

    Remainder ties go to the earlier split (train before validation before
    test), which keeps leftovers in train.
    """
    quotas = [n * r for r in ratios]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    docs,
    ratios=(0.7, 0.2, 0.1),
    seed: int = 0,
    stratify_on: str = "binary_label",
) -> SplitAssignment:
    """Deterministic class-stratified train/validation/test assignment.

    Per-class sizes follow the largest-remainder rounding of the ratios, so
    every split's class proportions stay within one sample of the global
    proportions. The same (docs, seed) always reproduces the same assignment,
    independent of input order.
    """
    if len(ratios) != 3:
        raise CorpusError("ratios must have exactly three entries")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"ratios must sum to 1, got {sum(ratios)}")
    by_class: dict[str, list[str]] = {}
    for doc in docs:
        value = getattr(doc, stratify_on, None)
        if value is None:
            raise CorpusError(f"document {doc.id!r} is missing the {stratify_on!r} field")
        by_class.setdefault(str(value), []).append(doc.id)
    if not by_class:
        raise CorpusError("no documents to split")
    parts: list[list[str]] = [[], [], []]
    for cls in sorted(by_class):
        ids = sorted(by_class[cls])
        if len(ids) < 3:
            raise CorpusError(f"class {cls!r} has {len(ids)} member(s), need at least 3")
        rng = random.Random(derive_seed(seed, "split", cls))
        rng.shuffle(ids)
        counts = _largest_remainder_counts(len(ids), ratios)
        start = 0
        for part, count in zip(parts, counts):
            part.extend(ids[start : start + count])
            start += count
    return SplitAssignment(
        train_ids=frozenset(parts[0]),
        validation_ids=frozenset(parts[1]),
        test_ids=frozenset(parts[2]),
    )
