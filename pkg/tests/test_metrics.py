import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from airreg.metrics import (
    MetricsReport,
    accuracy,
    activation_report,
    average_precision,
    mean_average_precision,
    precision_recall_at_n,
    separation_auc,
)
from airreg.tensor import Dataset

# 4 examples x 4 labels, values enumerated by hand
SCORES = np.array([
    [0.9, 0.1, 0.5, 0.2],
    [0.2, 0.8, 0.1, 0.3],
    [0.3, 0.4, 0.2, 0.6],
    [0.7, 0.1, 0.6, 0.05],
])
TRUTH = [{0, 2}, {1}, {0, 3}, {2}]
SINGLE = np.array([0, 1, 3, 2])


def test_accuracy_fixture():
    data = Dataset(SCORES, SINGLE, 4)
    assert accuracy(np.eye(4), data) == 0.75


def test_accuracy_ties_go_to_lowest_class():
    data = Dataset(np.ones((6, 2)), np.arange(6) % 3, 3)
    assert accuracy(np.zeros((2, 3)), data) == pytest.approx(1 / 3)


def test_precision_recall_fixture():
    assert precision_recall_at_n(SCORES, TRUTH, 1) == (0.75, 0.5, 0)
    assert precision_recall_at_n(SCORES, TRUTH, 2) == (0.625, 0.875, 0)
    P, R, _ = precision_recall_at_n(SCORES, TRUTH, 4)
    assert P == pytest.approx(np.mean([2, 1, 2, 1]) / 4) and R == 1.0


def test_precision_recall_hand_case():
    scores = np.array([[5.0, 4, 3, 2, 1, 0]])
    P, R, _ = precision_recall_at_n(scores, [{0, 3, 5}], 5)
    assert P == pytest.approx(0.4) and R == pytest.approx(2 / 3)


def test_precision_recall_skips_empty(caplog):
    P, R, skipped = precision_recall_at_n(SCORES[:2], [set(), {1}], 1)
    assert skipped == 1 and P == 1.0 and R == 1.0


def test_average_precision_fixtures():
    assert average_precision([4, 3, 2, 1], [1, 0, 1, 0]) == pytest.approx(5 / 6, abs=1e-15)
    assert average_precision([1, 0, 0], [1, 0, 0]) == 1.0
    assert average_precision([1, 0], [0, 0]) is None


def test_map_fixture():
    m, skipped = mean_average_precision(SCORES, TRUTH, axis="image")
    assert m == pytest.approx(5 / 6, abs=1e-15) and skipped == 0
    m, skipped = mean_average_precision(SCORES, TRUTH, axis="label")
    assert m == pytest.approx(23 / 24, abs=1e-15) and skipped == 0


def test_map_skips_label_without_positives():
    _, skipped = mean_average_precision(SCORES, [{0}, {0}, {1}, {0}], axis="label")
    assert skipped == 2


def test_map_random_scores_near_base_rate():
    rng = np.random.default_rng(0)
    truth = rng.random((4000, 5)) < 0.2
    m, _ = mean_average_precision(rng.random((4000, 5)), truth, axis="label")
    assert abs(m - 0.2) < 0.02


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, 12, elements=st.integers(-100, 100)), st.lists(st.booleans(), min_size=12, max_size=12))
def test_ap_invariant_to_monotone_maps(scores, rel):
    if not any(rel):
        return
    a = average_precision(scores, rel)
    assert 0 < a <= 1
    assert average_precision(scores * 3.0 + 1.0, rel) == pytest.approx(a, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31))
def test_precision_recall_identity(n, seed):
    rng = np.random.default_rng(seed)
    S = rng.random((10, 6))
    T = rng.random((10, 6)) < 0.4
    T[:, 0] = True
    P, R, _ = precision_recall_at_n(S[:1], T[:1], n)
    assert P * n == pytest.approx(R * T[0].sum())
    assert 0 <= P <= 1 and 0 <= R <= 1


def test_auc_extremes():
    mask = np.array([True] * 5 + [False] * 5)
    assert separation_auc(np.r_[np.arange(5) + 10, np.arange(5)], mask) == 1.0
    assert separation_auc(np.ones(10), mask) == 0.5
    assert separation_auc(np.ones(3), np.ones(3, dtype=bool)) is None
    rng = np.random.default_rng(1)
    assert abs(separation_auc(rng.random(20000), rng.random(20000) < 0.5) - 0.5) < 0.02


def test_activation_report():
    act = np.array([3.0, 2.0, 1.0, np.nan, 0.5])
    mask = np.array([True, True, False, True, False])
    rep = activation_report(act, mask, [act, act * 0])
    assert rep["auc"] == 1.0
    assert rep["gap"] == pytest.approx(2.5 - 0.75)
    assert [r["example"] for r in rep["ranking"]] == [0, 1, 2, 4, 3]
    assert len(rep["epochs"]) == 2 and rep["epochs"][1]["auc"] == 0.5
    assert activation_report(act, None) is None


def test_metrics_report_to_dict():
    d = MetricsReport(accuracy=0.5).to_dict()
    assert d["accuracy"] == 0.5 and d["residuals"] == []
