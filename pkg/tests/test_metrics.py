import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survrisk.metrics import (
    MetricsReport,
    auprc,
    auroc,
    c_index,
    confusion_metrics,
    render_report_table,
)


def brute_force_c_index(times, events, risks):
    concordant = 0.0
    comparable = 0
    n = len(times)
    for i in range(n):
        if events[i] != 1:
            continue
        for j in range(n):
            if times[i] < times[j]:
                comparable += 1
                if risks[i] > risks[j]:
                    concordant += 1.0
                elif risks[i] == risks[j]:
                    concordant += 0.5
    return None if comparable == 0 else concordant / comparable


def test_c_index_perfect_ordering():
    assert c_index([2, 10, 5], [1, 1, 1], [0.9, 0.1, 0.5]) == 1.0


def test_c_index_all_ties_is_half():
    assert c_index([1, 2, 3, 4], [1, 1, 0, 1], [3.3, 3.3, 3.3, 3.3]) == 0.5


def test_c_index_undefined_without_comparable_pairs():
    assert c_index([5, 5], [1, 1], [0.2, 0.9]) is None
    assert c_index([1, 2], [0, 0], [0.2, 0.9]) is None


def test_c_index_matches_brute_force_exactly(rng):
    for _ in range(25):
        n = int(rng.integers(2, 120))
        times = rng.integers(1, 25, size=n).astype(float)
        events = rng.integers(0, 2, size=n)
        risks = np.round(rng.normal(size=n), 1)  # rounding injects ties
        ours = c_index(times, events, risks)
        expected = brute_force_c_index(times.tolist(), events.tolist(), risks.tolist())
        assert ours == expected


def test_confusion_fixture():
    # TP=3, FP=1, FN=1, TN=5
    y_true = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    y_pred = [1, 1, 1, 0, 1, 0, 0, 0, 0, 0]
    r = confusion_metrics(y_true, y_pred)
    assert r.precision == pytest.approx(0.75)
    assert r.recall == pytest.approx(0.75)
    assert r.f1 == pytest.approx(0.75)
    assert r.accuracy == pytest.approx(0.8)
    assert r.specificity == pytest.approx(5 / 6)
    assert r.npv == pytest.approx(5 / 6)


def test_confusion_no_predicted_positives_precision_undefined():
    r = confusion_metrics([1, 0, 1], [0, 0, 0])
    assert r.precision is None
    assert r.f1 is None
    assert r.recall == 0.0


def test_confusion_perfect_prediction():
    r = confusion_metrics([1, 0, 1, 0], [1, 0, 1, 0])
    assert r.accuracy == r.precision == r.recall == r.f1 == r.specificity == r.npv == 1.0


def test_f1_is_harmonic_mean(rng):
    for _ in range(20):
        n = int(rng.integers(4, 80))
        y = rng.integers(0, 2, size=n)
        p = rng.integers(0, 2, size=n)
        r = confusion_metrics(y, p)
        if r.precision is None or r.recall is None or r.precision + r.recall == 0:
            continue
        assert abs(r.f1 - 2 * r.precision * r.recall / (r.precision + r.recall)) <= 1e-12


def trapezoid_auroc(labels, scores):
    """Independent ROC-curve oracle: trapezoidal area over all thresholds."""
    thresholds = sorted(set(scores), reverse=True)
    pos = sum(1 for y in labels if y == 1)
    neg = len(labels) - pos
    points = [(0.0, 0.0)]
    for theta in thresholds:
        tp = sum(1 for y, s in zip(labels, scores) if y == 1 and s >= theta)
        fp = sum(1 for y, s in zip(labels, scores) if y == 0 and s >= theta)
        points.append((fp / neg, tp / pos))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def enumerate_auprc(labels, scores):
    """Independent PR oracle: step area over every distinct-score threshold."""
    thresholds = sorted(set(scores), reverse=True)
    pos = sum(1 for y in labels if y == 1)
    area = 0.0
    prev_recall = 0.0
    for theta in thresholds:
        tp = sum(1 for y, s in zip(labels, scores) if y == 1 and s >= theta)
        pp = sum(1 for s in scores if s >= theta)
        precision = tp / pp
        recall = tp / pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def test_auroc_perfect_separation():
    assert auroc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0


def test_auroc_label_shuffle_near_half(rng):
    n = 1000
    scores = rng.normal(size=n)
    labels = rng.permutation(np.repeat([0, 1], n // 2))
    assert abs(auroc(labels, scores) - 0.5) < 0.05


def test_auroc_matches_trapezoid_oracle(rng):
    for _ in range(25):
        n = int(rng.integers(4, 150))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        scores = np.round(rng.normal(size=n), 1)
        assert auroc(labels, scores) == pytest.approx(
            trapezoid_auroc(labels.tolist(), scores.tolist()), abs=1e-10
        )


def test_auroc_orientation_symmetry(rng):
    for _ in range(10):
        n = 50
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        scores = rng.permutation(np.arange(n)).astype(float)  # tie-free
        assert auroc(labels, scores) + auroc(labels, -scores) == pytest.approx(1.0, abs=1e-12)


def test_auprc_constant_scores_equal_prevalence():
    assert auprc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]) == pytest.approx(0.5)
    assert auprc([1, 0, 0, 0], [1.0, 1.0, 1.0, 1.0]) == pytest.approx(0.25)


def test_auprc_perfect_separation():
    assert auprc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == pytest.approx(1.0)


def test_auprc_matches_enumeration_oracle(rng):
    for _ in range(25):
        n = int(rng.integers(4, 150))
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            continue
        scores = np.round(rng.normal(size=n), 1)
        assert auprc(labels, scores) == pytest.approx(
            enumerate_auprc(labels.tolist(), scores.tolist()), abs=1e-10
        )


def test_c_index_invariant_under_monotone_transform(rng):
    n = 80
    times = rng.integers(1, 30, size=n).astype(float)
    events = rng.integers(0, 2, size=n)
    risks = rng.normal(size=n)
    base = c_index(times, events, risks)
    transformed = c_index(times, events, risks**3 + risks)
    assert base == transformed


def test_report_table_row_formatting():
    report = MetricsReport(
        c_index=0.709, accuracy=0.742, precision=0.723, recall=0.779, npv=0.764,
        specificity=0.705, auroc=0.828, auprc=0.819, f1=0.755,
    )
    table = render_report_table([("Hypertension", report)], label="Disease")
    lines = table.splitlines()
    assert lines[0].split() == [
        "Disease", "C", "Index", "Accuracy", "Precision", "Recall",
        "NPV", "Specificity", "AUROC", "AUPRC", "F1", "score",
    ]
    assert lines[2].split() == [
        "Hypertension", "0.709", "0.742", "0.723", "0.779", "0.764",
        "0.705", "0.828", "0.819", "0.755",
    ]


def test_report_table_renders_undefined_as_na():
    table = render_report_table([("x", MetricsReport())])
    assert "n/a" in table


@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1, allow_nan=False)), min_size=2, max_size=60))
@settings(max_examples=50, deadline=None)
def test_auroc_bounded(pairs):
    labels = [p[0] for p in pairs]
    scores = [p[1] for p in pairs]
    value = auroc(labels, scores)
    if value is not None:
        assert 0.0 <= value <= 1.0
