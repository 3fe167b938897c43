import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tdss.errors import ShapeError
from tdss.metrics import confusion_matrix, evaluate_predictions, macro_f1, micro_f1, nmi


def from_confusion(cm):
    truth, pred = [], []
    for t, row in enumerate(cm):
        for p, count in enumerate(row):
            truth += [t] * count
            pred += [p] * count
    return np.array(pred), np.array(truth)


CM = [[2, 1, 0], [0, 2, 0], [1, 0, 4]]


def test_confusion_round_trip():
    pred, truth = from_confusion(CM)
    assert confusion_matrix(pred, truth, 3).tolist() == CM


def test_micro_f1_hand_value():
    pred, truth = from_confusion(CM)
    assert micro_f1(pred, truth, 3) == 8 / 10


def test_macro_f1_hand_value():
    pred, truth = from_confusion(CM)
    # class 0: tp 2, fp 1, fn 1; class 1: tp 2, fp 1, fn 0; class 2: tp 4, fp 0, fn 1
    expected = (4 / 6 + 4 / 5 + 8 / 9) / 3
    assert macro_f1(pred, truth, 3) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(106 / 135, abs=1e-15)


def test_perfect_and_all_wrong():
    y = np.array([0, 1, 2, 1])
    assert micro_f1(y, y, 3) == 1.0
    assert macro_f1(y, y, 3) == 1.0
    assert micro_f1((y + 1) % 3, y, 3) == 0.0


def test_absent_class_contributes_zero():
    y = np.array([0, 1, 0, 1])
    assert macro_f1(y, y, 3) == pytest.approx(2 / 3, abs=1e-15)


def test_length_mismatch():
    with pytest.raises(ShapeError):
        micro_f1([0, 1], [0], 2)
    with pytest.raises(ShapeError):
        nmi([0, 1], [0])


def test_nmi_identical_and_relabelled():
    a = np.array([0, 0, 1, 1, 2, 2, 2])
    assert nmi(a, a) == pytest.approx(1.0, abs=1e-15)
    assert nmi(a, (a + 1) % 3 + 5) == pytest.approx(1.0, abs=1e-15)


def test_nmi_independent_partitions():
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0


def test_nmi_direct_formula():
    a = [0, 0, 0, 1, 1, 2]
    b = [0, 0, 1, 1, 1, 1]
    n = len(a)
    pa = {x: a.count(x) / n for x in set(a)}
    pb = {x: b.count(x) / n for x in set(b)}
    joint = {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1 / n
    mi = sum(p * math.log(p / (pa[x] * pb[y])) for (x, y), p in joint.items())
    ha = -sum(p * math.log(p) for p in pa.values())
    hb = -sum(p * math.log(p) for p in pb.values())
    assert nmi(a, b) == pytest.approx(mi / math.sqrt(ha * hb), abs=1e-14)


def test_nmi_degenerate_convention():
    assert nmi([1, 1, 1], [4, 4, 4]) == 1.0
    assert nmi([1, 1, 1], [0, 1, 2]) == 0.0
    assert nmi([0, 1, 2], [3, 3, 3]) == 0.0


@given(st.lists(st.integers(0, 3), min_size=1, max_size=40), st.permutations(range(4)))
def test_nmi_relabel_invariance_and_range(labels, perm):
    a = np.array(labels)
    b = np.array(perm)[a]
    assert nmi(a, b) == pytest.approx(1.0, abs=1e-12)
    other = (a * 7 + 3) % 5
    assert 0.0 <= nmi(a, other) <= 1.0


def test_evaluate_predictions_bundle():
    pred, truth = from_confusion(CM)
    m = evaluate_predictions(pred, truth, 3)
    assert m.micro_f1 == 0.8
    assert set(m.to_dict()) == {"micro_f1", "macro_f1", "nmi"}
