"""
Classification metrics: rank-based AUC, accuracy, weighted F1, per-class
accuracy and the confusion matrix; plus mean / sample-std aggregation.
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from wikg.core.errors import InputError
from wikg.core.logging import log_run_event
from wikg.schemas.reports import MetricsReport, MetricSummary

BINARY_THRESHOLD = 0.5
SUMMARY_METRICS = ("accuracy", "auc", "weighted_f1")


def binary_auc(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """
    Mann-Whitney AUC with average ranks for ties. ``None`` when one of the
    two classes is absent.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(labels).astype(bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u_statistic = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def macro_ovr_auc(probabilities: np.ndarray, labels: Sequence[int]) -> Optional[float]:
    """Unweighted mean of one-vs-rest AUCs over classes with a defined AUC."""
    labels = np.asarray(labels)
    aucs = []
    for cls in range(probabilities.shape[1]):
        auc = binary_auc(probabilities[:, cls], labels == cls)
        if auc is None:
            log_run_event(
                event_type="auc_undefined",
                description=f"class {cls} has no positive or no negative samples; excluded from macro AUC",
            )
            continue
        aucs.append(auc)
    return float(np.mean(aucs)) if aucs else None


def confusion_matrix(labels: Sequence[int], predictions: Sequence[int], n_classes: int) -> np.ndarray:
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (np.asarray(labels), np.asarray(predictions)), 1)
    return matrix


def weighted_f1_from_confusion(confusion: np.ndarray) -> float:
    """Support-weighted mean of per-class F1, as a fraction."""
    confusion = np.asarray(confusion, dtype=np.float64)
    true_pos = np.diag(confusion)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    denominator = support + predicted
    f1 = np.divide(2 * true_pos, denominator, out=np.zeros_like(true_pos), where=denominator > 0)
    total = support.sum()
    return float((f1 * support).sum() / total) if total else 0.0


def predict_labels(probabilities: np.ndarray) -> np.ndarray:
    """Threshold 0.5 on the positive class for binary tasks, argmax otherwise."""
    if probabilities.shape[1] == 2:
        return (probabilities[:, 1] >= BINARY_THRESHOLD).astype(np.int64)
    return np.argmax(probabilities, axis=1)


def compute_metrics(labels: Sequence[int], probabilities: np.ndarray) -> MetricsReport:
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probabilities.ndim != 2 or probabilities.shape[0] != labels.shape[0]:
        raise InputError(f"probabilities {probabilities.shape} do not match {labels.shape[0]} labels")
    if labels.size == 0:
        raise InputError("cannot compute metrics on an empty evaluation set")
    n_classes = probabilities.shape[1]

    predictions = predict_labels(probabilities)
    confusion = confusion_matrix(labels, predictions, n_classes)
    if n_classes == 2:
        auc = binary_auc(probabilities[:, 1], labels == 1)
        if auc is None:
            log_run_event(event_type="auc_undefined", description="evaluation set holds a single class")
    else:
        auc = macro_ovr_auc(probabilities, labels)

    support = confusion.sum(axis=1)
    per_class = [
        100.0 * confusion[c, c] / support[c] if support[c] else None for c in range(n_classes)
    ]
    return MetricsReport(
        accuracy=100.0 * np.trace(confusion) / labels.size,
        auc=auc,
        weighted_f1=100.0 * weighted_f1_from_confusion(confusion),
        per_class_accuracy=per_class,
        confusion=confusion.tolist(),
        n_eval=int(labels.size),
    )


def mean_std(values: Sequence[Optional[float]]) -> MetricSummary:
    """Mean and sample standard deviation, ignoring undefined values."""
    present = [v for v in values if v is not None and not math.isnan(v)]
    if not present:
        return MetricSummary(mean=None, std=None, n=0)
    std = float(np.std(present, ddof=1)) if len(present) > 1 else 0.0
    return MetricSummary(mean=float(np.mean(present)), std=std, n=len(present))


def summarize_reports(reports: Sequence[MetricsReport]) -> Dict[str, MetricSummary]:
    return {name: mean_std([getattr(r, name) for r in reports]) for name in SUMMARY_METRICS}


def summarize_per_class(reports: Sequence[MetricsReport]) -> List[MetricSummary]:
    n_classes = max(len(r.per_class_accuracy) for r in reports)
    return [
        mean_std([r.per_class_accuracy[c] if c < len(r.per_class_accuracy) else None for r in reports])
        for c in range(n_classes)
    ]


def format_summary_table(summary: Dict[str, MetricSummary]) -> str:
    """Plain-text ``metric  mean +- std`` table; AUC as a fraction, the rest in percent."""
    lines = [f"{'metric':<12} {'mean':>10} {'std':>10}  n"]
    for name, s in summary.items():
        if s.mean is None:
            lines.append(f"{name:<12} {'n/a':>10} {'n/a':>10}  {s.n}")
        else:
            lines.append(f"{name:<12} {s.mean:>10.4f} {s.std:>10.4f}  {s.n}")
    return "\n".join(lines)
