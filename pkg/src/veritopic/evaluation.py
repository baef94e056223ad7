"""Metrics, prediction ensembling and the misclassification report.

"Weighted" precision/recall/F1 are support-weighted means of the per-class
values, with 0/0 defined as 0. The confusion matrix is indexed
[true class][predicted class] with class order (fake, real).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .classifier import Prediction
from .corpus import Corpus, Label
from .errors import DataError

_CLASS_NAMES = ("fake", "real")


@dataclass
class ConfusionMatrix:
    counts: list[list[int]]  # counts[true][pred]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def off_diagonal(self) -> int:
        return self.counts[0][1] + self.counts[1][0]


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    accuracy: float
    per_class: dict[str, ClassMetrics]
    confusion: ConfusionMatrix


@dataclass
class MisclassifiedDoc:
    doc_id: str
    true_label: Label
    predicted_label: Label
    p_fake: float
    p_real: float
    top_tokens: list[str]


@dataclass
class ErrorReport:
    misclassified: list[MisclassifiedDoc]
    keyword_table: dict[str, tuple[int, int]]  # token -> (count_fake, count_real)


def confusion_matrix(gold: Sequence[Label | int], pred: Sequence[Label | int]) -> ConfusionMatrix:
    if len(gold) != len(pred):
        raise DataError(f"gold has {len(gold)} labels but predictions have {len(pred)}")
    if len(gold) == 0:
        raise DataError("cannot build a confusion matrix from zero examples")
    counts = [[0, 0], [0, 0]]
    for t, p in zip(gold, pred):
        counts[int(t)][int(p)] += 1
    return ConfusionMatrix(counts)


def weighted_prf(matrix: ConfusionMatrix) -> EvalReport:
    """Per-class and support-weighted precision/recall/F1 plus accuracy."""
    total = matrix.total
    if total == 0:
        raise DataError("empty confusion matrix")
    c = matrix.counts
    per_class: dict[str, ClassMetrics] = {}
    weighted_p = weighted_r = weighted_f = 0.0
    correct = 0
    for k, name in enumerate(_CLASS_NAMES):
        tp = c[k][k]
        support = c[k][0] + c[k][1]
        predicted = c[0][k] + c[1][k]
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        per_class[name] = ClassMetrics(precision, recall, f1, support)
        weighted_p += support * precision
        weighted_r += support * recall
        weighted_f += support * f1
        correct += tp
    return EvalReport(
        precision=weighted_p / total,
        recall=weighted_r / total,
        f1=weighted_f / total,
        accuracy=correct / total,
        per_class=per_class,
        confusion=matrix,
    )


def ensemble_predictions(a: Sequence[Prediction], b: Sequence[Prediction]) -> list[Prediction]:
    """Elementwise mean of the two members' probabilities, then argmax."""
    if len(a) != len(b):
        raise DataError(f"ensemble members have {len(a)} vs {len(b)} predictions")
    combined: list[Prediction] = []
    for pa, pb in zip(a, b):
        if pa.doc_id != pb.doc_id:
            raise DataError(f"ensemble id mismatch: {pa.doc_id!r} vs {pb.doc_id!r}")
        probs = (pa.probabilities + pb.probabilities) / 2.0
        combined.append(Prediction(pa.doc_id, probs, Label(int(np.argmax(probs)))))
    return combined


def keyword_class_counts(
    corpus: Corpus, keywords: Sequence[str]
) -> dict[str, tuple[int, int]]:
    """Token occurrences (with multiplicity) per keyword in fake vs real docs."""
    wanted = set(keywords)
    fake_counts = {k: 0 for k in wanted}
    real_counts = {k: 0 for k in wanted}
    for doc in corpus.documents:
        if doc.label is None:
            continue
        bucket = fake_counts if doc.label is Label.FAKE else real_counts
        for token in doc.tokens:
            if token in wanted:
                bucket[token] += 1
    return {k: (fake_counts[k], real_counts[k]) for k in keywords}


def _log_odds(counts: tuple[int, int]) -> float:
    return abs(math.log((counts[0] + 1) / (counts[1] + 1)))


def build_error_report(
    gold: Sequence[Label | int],
    predictions: Sequence[Prediction],
    corpus: Corpus,
    reference: Corpus,
    extra_keywords: Sequence[str] = (),
) -> ErrorReport:
    """Misclassified documents plus their most class-skewed tokens.

    `corpus` is the evaluated (preprocessed) corpus aligned with gold and
    predictions; `reference` is the labeled corpus the keyword counts come
    from (train + validation in the published analysis). Each misclassified
    document gets the 5 of its tokens with the largest
    |ln((count_fake+1)/(count_real+1))|.
    """
    if not (len(gold) == len(predictions) == len(corpus.documents)):
        raise DataError("gold, predictions and corpus must be aligned")
    misclassified_docs = [
        (doc, Label(int(t)), pred)
        for doc, t, pred in zip(corpus.documents, gold, predictions)
        if Label(int(t)) != pred.label
    ]
    vocabulary: set[str] = set(extra_keywords)
    for doc, _, _ in misclassified_docs:
        vocabulary.update(doc.tokens)
    table = keyword_class_counts(reference, sorted(vocabulary))

    misclassified: list[MisclassifiedDoc] = []
    for doc, true_label, pred in misclassified_docs:
        ranked = sorted(set(doc.tokens), key=lambda tok: (-_log_odds(table[tok]), tok))
        misclassified.append(
            MisclassifiedDoc(
                doc_id=doc.id,
                true_label=true_label,
                predicted_label=pred.label,
                p_fake=float(pred.probabilities[0]),
                p_real=float(pred.probabilities[1]),
                top_tokens=ranked[:5],
            )
        )
    return ErrorReport(misclassified, table)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "precision": report.precision,
        "recall": report.recall,
        "weighted_f1": report.f1,
        "accuracy": report.accuracy,
        "per_class": {
            name: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for name, m in report.per_class.items()
        },
        "confusion": report.confusion.counts,
    }


def error_report_to_dict(report: ErrorReport) -> dict:
    return {
        "misclassified": [
            {
                "doc_id": d.doc_id,
                "true": d.true_label.name.lower(),
                "predicted": d.predicted_label.name.lower(),
                "p_fake": d.p_fake,
                "p_real": d.p_real,
                "top_tokens": d.top_tokens,
            }
            for d in report.misclassified
        ],
        "keyword_table": {
            token: {"count_fake": cf, "count_real": cr}
            for token, (cf, cr) in report.keyword_table.items()
        },
    }


def format_confusion(matrix: ConfusionMatrix) -> str:
    """Aligned text table, rows = true class, columns = predicted class."""
    header = ["true\\pred"] + list(_CLASS_NAMES)
    rows = [
        [name] + [str(matrix.counts[k][j]) for j in range(2)]
        for k, name in enumerate(_CLASS_NAMES)
    ]
    widths = [max(len(row[col]) for row in [header] + rows) for col in range(3)]
    lines = []
    for row in [header] + rows:
        lines.append("  ".join(cell.rjust(widths[col]) for col, cell in enumerate(row)))
    return "\n".join(lines)


def labels_from_mapping(
    ids: Sequence[str], labels_by_id: Mapping[str, Label]
) -> list[Label]:
    missing = [doc_id for doc_id in ids if doc_id not in labels_by_id]
    if missing:
        raise DataError(f"missing gold label for {missing[0]!r}")
    return [labels_by_id[doc_id] for doc_id in ids]
