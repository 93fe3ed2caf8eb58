"""Evaluation metrics: Harrell's C-index, confusion metrics, AUROC, AUPRC.

Metrics with a zero denominator are reported as None ("n/a" in rendered
tables) rather than 0, so degenerate inputs stay visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import DataError

REPORT_COLUMNS = (
    ("c_index", "C Index"),
    ("accuracy", "Accuracy"),
    ("precision", "Precision"),
    ("recall", "Recall"),
    ("npv", "NPV"),
    ("specificity", "Specificity"),
    ("auroc", "AUROC"),
    ("auprc", "AUPRC"),
    ("f1", "F1 score"),
)


@dataclass
class MetricsReport:
    c_index: Optional[float] = None
    accuracy: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    npv: Optional[float] = None
    specificity: Optional[float] = None
    auroc: Optional[float] = None
    auprc: Optional[float] = None
    f1: Optional[float] = None

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def c_index(times, events, risks) -> Optional[float]:
    """Harrell's concordance index.

    Comparable pairs (i, j) have ``t_i < t_j`` and ``event_i = 1``; a pair is
    concordant when ``risk_i > risk_j``, with half credit for risk ties.
    Returns None when no comparable pairs exist.  Counting is integer-exact.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=np.int64)
    r = np.asarray(risks, dtype=float)
    if not (t.shape == e.shape == r.shape):
        raise ValueError("times, events, risks must have equal length")
    concordant = 0
    tied = 0
    comparable = 0
    for i in np.flatnonzero(e == 1):
        later = t > t[i]
        comparable += int(later.sum())
        concordant += int(np.sum(r[i] > r[later]))
        tied += int(np.sum(r[i] == r[later]))
    if comparable == 0:
        return None
    return (2 * concordant + tied) / (2 * comparable)


def confusion_metrics(labels_true, labels_pred) -> MetricsReport:
    """Accuracy, precision, recall, NPV, specificity and F1 from 0/1 labels."""
    y = np.asarray(labels_true, dtype=np.int64)
    p = np.asarray(labels_pred, dtype=np.int64)
    if y.shape != p.shape or y.size == 0:
        raise ValueError("label arrays must be nonempty and of equal length")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    fn = int(np.sum((y == 1) & (p == 0)))
    tn = int(np.sum((y == 0) & (p == 0)))

    def ratio(num, den):
        return num / den if den > 0 else None

    precision = ratio(tp, tp + fp)
    recall = ratio(tp, tp + fn)
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=ratio(tp + tn, tp + fp + fn + tn),
        precision=precision,
        recall=recall,
        npv=ratio(tn, tn + fn),
        specificity=ratio(tn, tn + fp),
        f1=f1,
    )


def auroc(labels_true, scores) -> Optional[float]:
    """Rank-based (Mann-Whitney) AUROC with midrank tie handling.

    Higher score must mean more diseased.  None when one class is empty.
    """
    y = np.asarray(labels_true, dtype=np.int64)
    s = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s, method="average")
    rank_sum_pos = float(np.sum(ranks[y == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(labels_true, scores) -> Optional[float]:
    """Step-wise area under the precision-recall curve.

    Thresholds are the distinct score values; the area sums
    ``precision * delta_recall`` without interpolating precision.  Constant
    scores give the positive prevalence.
    """
    y = np.asarray(labels_true, dtype=np.int64)
    s = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(y == 1))
    if y.size == 0 or n_pos == 0:
        return None
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    # cut after the last occurrence of each distinct score
    boundary = np.flatnonzero(np.diff(s_sorted) != 0.0)
    cuts = np.concatenate([boundary, [y.size - 1]])
    tp = np.cumsum(y_sorted)[cuts]
    predicted_pos = cuts + 1
    precision = tp / predicted_pos
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def evaluate(model, X, times, events) -> MetricsReport:
    """Full report for a fitted risk model on one dataset split.

    The C-index always uses the ensemble risk score; threshold-free metrics
    use the configured technique's disease-oriented score and confusion
    metrics use its labels.
    """
    from . import classify  # late import: classify depends on this module

    X = np.asarray(X, dtype=np.int64)
    if X.shape[0] == 0:
        raise DataError("cannot evaluate on an empty dataset")
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=np.int64)
    risks = model.forest.predict_risk_batch(X)
    labels, _ = classify.predict_labels(model, X)
    scores = classify.disease_score(model, X)
    report = confusion_metrics(events, labels)
    report.c_index = c_index(times, events, risks)
    report.auroc = auroc(events, scores)
    report.auprc = auprc(events, scores)
    return report


def _cell(value: Optional[float]) -> str:
    return "n/a" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.3f}"


def render_report_table(rows: list[tuple[str, MetricsReport]], label: str = "Dataset") -> str:
    """Fixed-width table with one row per (name, report) pair."""
    headers = [label] + [title for _, title in REPORT_COLUMNS]
    table = [headers]
    for name, report in rows:
        table.append([name] + [_cell(getattr(report, attr)) for attr, _ in REPORT_COLUMNS])
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def report_csv_rows(rows: list[tuple[str, MetricsReport]]) -> list[list[str]]:
    header = ["dataset"] + [attr for attr, _ in REPORT_COLUMNS]
    out = [header]
    for name, report in rows:
        out.append([name] + [_cell(getattr(report, attr)) for attr, _ in REPORT_COLUMNS])
    return out
