import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stormoutage.metrics import (
    binary_auc, classification_metrics, confusion_matrix, pr_curve, roc_auc_macro, train_val_split,
)

Y_TRUE = [0, 0, 1, 2, 3, 3]
Y_PRED = [0, 1, 1, 2, 3, 2]


def test_hand_confusion():
    counts, norm = confusion_matrix(Y_TRUE, Y_PRED)
    assert counts.tolist() == [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 1, 1]]
    assert norm[0].tolist() == [0.5, 0.5, 0.0, 0.0]


def test_hand_scores():
    r = classification_metrics(Y_TRUE, Y_PRED)
    assert r.accuracy == pytest.approx(4 / 6)
    assert r.recall_macro == 0.75
    assert r.precision_per_class == [1.0, 0.5, 0.5, 1.0]


def test_printed_f1_variant_is_half_of_standard():
    std = classification_metrics(Y_TRUE, Y_PRED)
    alt = classification_metrics(Y_TRUE, Y_PRED, f1_formula="printed")
    assert alt.f1_macro == pytest.approx(std.f1_macro / 2)
    with pytest.raises(ValueError):
        classification_metrics(Y_TRUE, Y_PRED, f1_formula="other")


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=200))
def test_micro_identity(pairs):
    yt, yp = map(list, zip(*pairs))
    r = classification_metrics(yt, yp)
    assert r.precision_micro == pytest.approx(r.accuracy)
    assert r.recall_micro == pytest.approx(r.accuracy)
    assert r.f1_micro == pytest.approx(r.accuracy)


def test_auc_hand_case():
    assert binary_auc([1, 1, 0, 0], [0.9, 0.4, 0.6, 0.1]) == 0.75


def test_auc_ties_count_half():
    assert binary_auc([1, 0], [0.5, 0.5]) == 0.5


def test_macro_auc_skips_absent_class():
    y = np.array([0, 0, 1, 1])
    p = np.array([[0.9, 0.1, 0, 0], [0.8, 0.2, 0, 0], [0.3, 0.7, 0, 0], [0.1, 0.9, 0, 0]])
    assert roc_auc_macro(y, p) == 1.0


def test_pr_curve_endpoints():
    pts = pr_curve([1, 0, 1, 0], np.array([0.9, 0.8, 0.3, 0.1]), 1)
    assert pts[0] == (0.5, 1.0)
    assert pts[-1] == (1.0, 0.5)


def test_length_mismatch():
    with pytest.raises(ValueError):
        classification_metrics([0, 1], [0])


@given(st.integers(2, 500), st.integers(0, 1000))
def test_split_partitions(n, seed):
    tr, va = train_val_split(n, 0.75, seed)
    assert len(tr) == int(np.floor(n * 0.75))
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(n))


def test_split_sizes_and_stratified():
    tr, va = train_val_split(100, 0.75, 0)
    assert (len(tr), len(va)) == (75, 25)
    y = np.array([0] * 80 + [1] * 20)
    tr, va = train_val_split(100, 0.75, 0, stratify=y)
    assert np.bincount(y[tr]).tolist() == [60, 15]
