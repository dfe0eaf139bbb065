"""Classification metrics, boundary-offset statistics, report rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    """Raised for malformed metric inputs."""


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = gold, columns = predicted
    classes: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(gold, predicted, classes) -> ConfusionMatrix:
    """Count matrix with rows indexed by gold label, columns by prediction."""
    gold = list(gold)
    predicted = list(predicted)
    if len(gold) != len(predicted):
        raise MetricsError("gold and predicted label lists disagree on length")
    classes = tuple(classes)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for g, p in zip(gold, predicted):
        if g not in index:
            raise MetricsError(f"unknown gold label {g!r}")
        if p not in index:
            raise MetricsError(f"unknown predicted label {p!r}")
        counts[index[g], index[p]] += 1
    return ConfusionMatrix(counts=counts, classes=classes)


def per_class_prf(matrix: ConfusionMatrix) -> dict:
    """Precision/recall/F1 per class plus accuracy and macro averages.

    A zero denominator yields 0 for the affected metric.
    """
    counts = matrix.counts
    if counts.sum() == 0:
        raise MetricsError("empty confusion matrix")
    per_class = {}
    for i, cls in enumerate(matrix.classes):
        tp = counts[i, i]
        fp = counts[:, i].sum() - tp
        fn = counts[i, :].sum() - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[cls] = {
            "precision": float(precision),
            "recall": float(recall),
            "f1": float(f1),
        }
    macro = {
        key: float(np.mean([per_class[c][key] for c in matrix.classes]))
        for key in ("precision", "recall", "f1")
    }
    return {
        "per_class": per_class,
        "accuracy": float(np.trace(counts) / counts.sum()),
        "macro_precision": macro["precision"],
        "macro_recall": macro["recall"],
        "macro_f1": macro["f1"],
    }


def mcc(matrix: ConfusionMatrix) -> float:
    """Matthews correlation via the multi-category generalization.

    For two classes this is exactly the familiar binary formula; any zero
    marginal factor yields 0.
    """
    counts = matrix.counts.astype(np.float64)
    if counts.sum() == 0:
        raise MetricsError("empty confusion matrix")
    total = counts.sum()
    trace = np.trace(counts)
    gold_marginal = counts.sum(axis=1)
    pred_marginal = counts.sum(axis=0)
    cov = trace * total - float(gold_marginal @ pred_marginal)
    var_gold = total * total - float(gold_marginal @ gold_marginal)
    var_pred = total * total - float(pred_marginal @ pred_marginal)
    if var_gold == 0.0 or var_pred == 0.0:
        return 0.0
    return float(cov / math.sqrt(var_gold * var_pred))


def boundary_offset_stats(gold_boundaries, predicted_boundaries) -> dict:
    """Match transitions greedily by nearest index within the same direction.

    Unmatched gold transitions count as missed, unmatched predictions as
    spurious. The exact-match rate is the fraction of gold transitions
    matched at offset zero (1.0 when both lists are empty).
    """
    gold = list(gold_boundaries)
    pred = list(predicted_boundaries)
    pairs = []
    for gi, g in enumerate(gold):
        for pi, p in enumerate(pred):
            if g["from"] == p["from"] and g["to"] == p["to"]:
                pairs.append((abs(g["index"] - p["index"]), gi, pi))
    pairs.sort()
    used_gold: set[int] = set()
    used_pred: set[int] = set()
    offsets = []
    for offset, gi, pi in pairs:
        if gi in used_gold or pi in used_pred:
            continue
        used_gold.add(gi)
        used_pred.add(pi)
        offsets.append(offset)
    exact = sum(1 for o in offsets if o == 0)
    return {
        "exact_match_rate": exact / len(gold) if gold else 1.0,
        "mean_offset": float(np.mean(offsets)) if offsets else 0.0,
        "exact_matches": exact,
        "matched": len(offsets),
        "missed": len(gold) - len(offsets),
        "spurious": len(pred) - len(offsets),
        "offset_sum": int(sum(offsets)),
    }


def _flatten(report: dict) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for key in value:  # insertion order is the stable field order
                walk(f"{prefix}.{key}" if prefix else str(key), value[key])
        elif isinstance(value, (list, tuple)):
            rows.append((prefix, json.dumps(list(value))))
        else:
            rows.append((prefix, value))

    walk("", report)
    return rows


def render_report(report: dict, format: str = "json") -> str:
    """Serialize a metrics report as json, csv, or a markdown table."""
    if format == "json":
        return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for key, value in _flatten(report):
            writer.writerow([key, value])
        return buf.getvalue()
    if format == "markdown":
        lines = []
        per_class = report.get("per_class", {})
        if per_class:
            lines.append("| Class | Precision | Recall | F1 |")
            lines.append("| --- | --- | --- | --- |")
            for cls, vals in per_class.items():
                lines.append(
                    f"| {cls} | {vals['precision']:.4f} | {vals['recall']:.4f} "
                    f"| {vals['f1']:.4f} |"
                )
            lines.append("")
        for key, value in _flatten(report):
            if key.startswith("per_class."):
                continue
            if isinstance(value, float):
                value = f"{value:.4f}"
            lines.append(f"- {key}: {value}")
        return "\n".join(lines) + "\n"
    raise MetricsError(f"unknown report format {format!r}")
