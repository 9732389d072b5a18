"""Classifier evaluation: confusion matrices, per-class precision/recall/F1,
support-weighted and macro aggregates, paired randomization significance
testing, and error-analysis summaries.

Zero-denominator convention: precision and recall are 0 when their
denominator is 0; zero-support classes score 0 and are excluded from the
macro average (and carry zero weight in the weighted average).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ontology
from .autodiff import Rng

AVERAGING_NOTE = "averages are support-weighted (weighted F1 is the headline metric)"


class EvalError(ValueError):
    pass


@dataclass
class EvalReport:
    labels: tuple[str, ...]
    confusion: np.ndarray
    per_class: dict[str, dict[str, float]]
    accuracy: float
    macro_f1: float
    weighted_f1: float
    top_confusions: list[tuple[str, str, int]] = field(default_factory=list)
    note: str = AVERAGING_NOTE


def _to_indices(codes, labels: tuple[str, ...]) -> np.ndarray:
    index = {c: i for i, c in enumerate(labels)}
    try:
        return np.array([index[c] for c in codes], dtype=np.intp)
    except KeyError as exc:
        raise EvalError(f"label {exc.args[0]!r} not in {labels}") from None


def confusion(golds, preds, labels: tuple[str, ...] | None = None) -> np.ndarray:
    """Count matrix with rows = gold classes, columns = predicted."""
    labels = labels or ontology.VALID_CODES
    if len(golds) != len(preds):
        raise EvalError(f"length mismatch: {len(golds)} golds vs {len(preds)} preds")
    n = len(labels)
    g = _to_indices(golds, labels)
    p = _to_indices(preds, labels)
    return np.bincount(g * n + p, minlength=n * n).reshape(n, n)


def _scores(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    diag = np.diag(matrix).astype(np.float64)
    colsum = matrix.sum(axis=0).astype(np.float64)
    rowsum = matrix.sum(axis=1).astype(np.float64)
    precision = np.divide(diag, colsum, out=np.zeros_like(diag), where=colsum > 0)
    recall = np.divide(diag, rowsum, out=np.zeros_like(diag), where=rowsum > 0)
    pr = precision + recall
    f1 = np.divide(2 * precision * recall, pr, out=np.zeros_like(diag), where=pr > 0)
    return precision, recall, f1, rowsum


def weighted_f1_from_confusion(matrix: np.ndarray) -> float:
    _, _, f1, support = _scores(matrix)
    total = support.sum()
    if total == 0:
        return 0.0
    return float((support * f1).sum() / total)


def prf1(matrix: np.ndarray, labels: tuple[str, ...] | None = None) -> EvalReport:
    """Full report from a confusion matrix."""
    labels = labels or ontology.VALID_CODES
    matrix = np.asarray(matrix)
    if matrix.shape != (len(labels), len(labels)):
        raise EvalError(f"matrix shape {matrix.shape} != ({len(labels)}, {len(labels)})")
    precision, recall, f1, support = _scores(matrix)
    total = support.sum()
    per_class = {
        label: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(support[i]),
        }
        for i, label in enumerate(labels)
    }
    present = support > 0
    macro = float(f1[present].mean()) if present.any() else 0.0
    weighted = float((support * f1).sum() / total) if total > 0 else 0.0
    accuracy = float(np.trace(matrix) / total) if total > 0 else 0.0
    cells = [
        (labels[i], labels[j], int(matrix[i, j]))
        for i in range(len(labels))
        for j in range(len(labels))
        if i != j and matrix[i, j] > 0
    ]
    cells.sort(key=lambda c: -c[2])
    return EvalReport(
        labels=tuple(labels),
        confusion=matrix,
        per_class=per_class,
        accuracy=accuracy,
        macro_f1=macro,
        weighted_f1=weighted,
        top_confusions=cells,
    )


def evaluate(golds, preds, labels: tuple[str, ...] | None = None) -> EvalReport:
    """Convenience: confusion + prf1 in one call."""
    labels = labels or ontology.VALID_CODES
    return prf1(confusion(golds, preds, labels), labels)


def paired_permutation_test(
    preds_a, preds_b, golds, n_iter: int = 10000, seed: int = 42,
    labels: tuple[str, ...] | None = None,
) -> float:
    """Paired approximate-randomization test on the weighted F1 difference.

    The statistic is |wF1(a) - wF1(b)|.  Each iteration swaps the two
    systems' predictions example-wise with probability 1/2 and recomputes
    the statistic; p = (1 + #{permuted >= observed}) / (1 + n_iter).
    """
    labels = labels or ontology.VALID_CODES
    if not (len(preds_a) == len(preds_b) == len(golds)):
        raise EvalError("preds_a, preds_b, golds must have equal lengths")
    if n_iter < 1:
        raise EvalError("n_iter must be >= 1")
    n = len(labels)
    g = _to_indices(golds, labels)
    a = _to_indices(preds_a, labels)
    b = _to_indices(preds_b, labels)

    def stat(pa: np.ndarray, pb: np.ndarray) -> float:
        ma = np.bincount(g * n + pa, minlength=n * n).reshape(n, n)
        mb = np.bincount(g * n + pb, minlength=n * n).reshape(n, n)
        return abs(weighted_f1_from_confusion(ma) - weighted_f1_from_confusion(mb))

    observed = stat(a, b)
    rng = Rng(seed)
    hits = 0
    for _ in range(n_iter):
        swap = rng.random(len(g)) < 0.5
        pa = np.where(swap, b, a)
        pb = np.where(swap, a, b)
        if stat(pa, pb) >= observed:
            hits += 1
    return (1 + hits) / (1 + n_iter)


def error_report(
    report: EvalReport, examples: list[tuple[str, str, str]], k: int = 10
) -> list[dict]:
    """Top-k off-diagonal confusion cells with up to 3 example texts each.

    examples are (gold, predicted, text) triples in evaluation order;
    texts are attached deterministically (first occurrences).
    """
    if k < 1:
        raise EvalError("k must be >= 1")
    samples: dict[tuple[str, str], list[str]] = {}
    for gold, pred, text in examples:
        if gold == pred:
            continue
        bucket = samples.setdefault((gold, pred), [])
        if len(bucket) < 3:
            bucket.append(text)
    out = []
    for gold, pred, count in report.top_confusions[:k]:
        out.append(
            {
                "gold": gold,
                "predicted": pred,
                "count": count,
                "samples": samples.get((gold, pred), []),
            }
        )
    return out


def report_to_dict(report: EvalReport) -> dict:
    return {
        "labels": list(report.labels),
        "per_class": report.per_class,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "weighted_f1": report.weighted_f1,
        "confusion": report.confusion.tolist(),
        "top_confusions": [list(c) for c in report.top_confusions],
        "note": report.note,
    }


def report_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True)


def report_table(report: EvalReport) -> str:
    """Plain-text per-class score table with the averages row."""
    lines = [f"{'Cls':<6} {'P':>6} {'R':>6} {'F1':>6} {'Support':>8}"]
    for label in report.labels:
        row = report.per_class[label]
        lines.append(
            f"{label:<6} {row['precision']:>6.2f} {row['recall']:>6.2f} "
            f"{row['f1']:>6.2f} {row['support']:>8d}"
        )
    total = sum(report.per_class[c]["support"] for c in report.labels)
    w_p = sum(report.per_class[c]["precision"] * report.per_class[c]["support"] for c in report.labels)
    w_r = sum(report.per_class[c]["recall"] * report.per_class[c]["support"] for c in report.labels)
    if total:
        lines.append(
            f"{'Avg.':<6} {w_p / total:>6.2f} {w_r / total:>6.2f} "
            f"{report.weighted_f1:>6.2f} {total:>8d}"
        )
    lines.append(f"# {report.note}")
    return "\n".join(lines)
