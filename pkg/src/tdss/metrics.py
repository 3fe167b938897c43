"""Classification and clustering scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError

__all__ = ["Metrics", "confusion_matrix", "micro_f1", "macro_f1", "nmi", "evaluate_predictions"]


@dataclass(frozen=True)
class Metrics:
    micro_f1: float
    macro_f1: float
    nmi: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ShapeError("prediction/truth length mismatch", pred.shape, truth.shape)
    return pred, truth


def confusion_matrix(pred, truth, num_classes: int) -> np.ndarray:
    """``C[t, p]`` counts nodes of true class t predicted as p."""
    pred, truth = _pair(pred, truth)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def micro_f1(pred, truth, num_classes: int) -> float:
    # with one label per node, pooled precision == pooled recall == accuracy
    cm = confusion_matrix(pred, truth, num_classes)
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


def macro_f1(pred, truth, num_classes: int) -> float:
    """Unweighted mean of per-class F1; a class absent from both sides scores 0."""
    cm = confusion_matrix(pred, truth, num_classes)
    tp = np.diag(cm).astype(np.float64)
    denom = 2 * tp + (cm.sum(0) - tp) + (cm.sum(1) - tp)
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean()) if num_classes else 0.0


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(assign_a, assign_b) -> float:
    """``I(A;B) / sqrt(H(A) H(B))`` with natural logarithms.

    When either entropy vanishes the score is 1 if the two partitions are
    identical up to relabelling and 0 otherwise.
    """
    a, b = _pair(assign_a, assign_b)
    if a.size == 0:
        raise ShapeError("nmi needs nonempty assignments", a.shape, b.shape)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    ha = _entropy(joint.sum(1))
    hb = _entropy(joint.sum(0))
    if ha == 0.0 or hb == 0.0:
        same = joint.shape[0] == joint.shape[1] and np.count_nonzero(joint) == joint.shape[0]
        return 1.0 if (ha == hb and same) else 0.0
    n = a.size
    nz = joint > 0
    pij = joint[nz] / n
    pa = (joint.sum(1) / n)[:, None].repeat(joint.shape[1], 1)[nz]
    pb = (joint.sum(0) / n)[None, :].repeat(joint.shape[0], 0)[nz]
    mi = float((pij * np.log(pij / (pa * pb))).sum())
    return min(max(mi / np.sqrt(ha * hb), 0.0), 1.0)


def evaluate_predictions(pred, truth, num_classes: int) -> Metrics:
    return Metrics(micro_f1(pred, truth, num_classes), macro_f1(pred, truth, num_classes), nmi(pred, truth))
