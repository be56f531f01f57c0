"""Multiclass evaluation: confusion matrices, micro/macro scores, ROC AUC, PR curves."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

log = logging.getLogger(__name__)

N_CLASSES = 4


def _check(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    return y_true, y_pred


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES):
    """Counts (row = true, column = predicted) and the row-normalized matrix."""
    y_true, y_pred = _check(y_true, y_pred)
    if len(y_true) and (min(y_true.min(), y_pred.min()) < 0 or max(y_true.max(), y_pred.max()) >= n_classes):
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    rows = counts.sum(axis=1, keepdims=True)
    norm = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    return counts, norm


def _div(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.divide(a, b, out=np.zeros(np.broadcast(a, b).shape), where=b > 0)


def _f1(p, r):
    return _div(2 * p * r, p + r)


@dataclass
class MetricsReport:
    accuracy: float
    auc_macro: float | None
    precision_micro: float
    precision_macro: float
    recall_micro: float
    recall_macro: float
    f1_micro: float
    f1_macro: float
    precision_per_class: list
    recall_per_class: list
    f1_per_class: list
    confusion_counts: list
    confusion_normalized: list
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self, title: str = "") -> str:
        pct = lambda v: "n/a" if v is None else f"{100 * v:.1f} %"
        lines = [title] if title else []
        lines += [
            f"{'Accuracy':<24}{pct(self.accuracy)}",
            f"{'AUC':<24}{'n/a' if self.auc_macro is None else f'{self.auc_macro:.3f}'}",
            f"{'Precision micro average':<24}{pct(self.precision_micro)}",
            f"{'Precision macro average':<24}{pct(self.precision_macro)}",
            f"{'Recall micro average':<24}{pct(self.recall_micro)}",
            f"{'Recall macro average':<24}{pct(self.recall_macro)}",
            f"{'F1 score micro average':<24}{pct(self.f1_micro)}",
            f"{'F1 score macro average':<24}{pct(self.f1_macro)}",
            "confusion (rows true, cols predicted):",
        ]
        lines += ["  " + " ".join(f"{v:8d}" for v in row) for row in self.confusion_counts]
        return "\n".join(lines) + "\n"


def per_class_counts(y_true, y_pred, n_classes=N_CLASSES):
    counts, _ = confusion_matrix(y_true, y_pred, n_classes)
    tp = np.diag(counts).astype(float)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    return tp, fp, fn


def classification_metrics(y_true, y_pred, n_classes: int = N_CLASSES, proba=None,
                           f1_formula: str = "standard") -> MetricsReport:
    """Accuracy plus micro/macro precision, recall and F1.

    ``f1_formula="printed"`` reproduces the alternative macro-F1 without the
    factor 2, ``mean(P*R/(P+R))``; the per-class F1 values stay standard.
    """
    y_true, y_pred = _check(y_true, y_pred)
    counts, norm = confusion_matrix(y_true, y_pred, n_classes)
    tp, fp, fn = per_class_counts(y_true, y_pred, n_classes)
    prec = _div(tp, tp + fp)
    rec = _div(tp, tp + fn)
    f1 = _f1(prec, rec)
    TP, FP, FN = tp.sum(), fp.sum(), fn.sum()
    p_mi = float(_div(TP, TP + FP))
    r_mi = float(_div(TP, TP + FN))
    if f1_formula == "standard":
        f1_macro = float(f1.mean())
    elif f1_formula == "printed":
        f1_macro = float(_div(prec * rec, prec + rec).mean())
    else:
        raise ValueError(f"unknown f1_formula {f1_formula!r}")
    auc = roc_auc_macro(y_true, proba) if proba is not None else None
    n = len(y_true)
    return MetricsReport(
        accuracy=float(tp.sum() / n) if n else 0.0,
        auc_macro=auc,
        precision_micro=p_mi,
        precision_macro=float(prec.mean()),
        recall_micro=r_mi,
        recall_macro=float(rec.mean()),
        f1_micro=float(_f1(p_mi, r_mi)),
        f1_macro=f1_macro,
        precision_per_class=prec.tolist(),
        recall_per_class=rec.tolist(),
        f1_per_class=f1.tolist(),
        confusion_counts=counts.tolist(),
        confusion_normalized=norm.tolist(),
        n_samples=n,
    )


def binary_auc(labels, scores) -> float:
    """Mann-Whitney rank statistic; tied scores count one half."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative samples")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_auc_macro(y_true, proba) -> float | None:
    y_true = np.asarray(y_true, dtype=np.int64)
    proba = np.asarray(proba, dtype=float)
    if proba.ndim != 2 or proba.shape[0] != len(y_true):
        raise ValueError("proba must be (n_samples, n_classes)")
    aucs = []
    for k in range(proba.shape[1]):
        pos = y_true == k
        if not pos.any():
            log.warning("class %d absent from y_true; skipped in AUC", k)
            continue
        if pos.all():
            log.warning("class %d is the only class present; AUC undefined", k)
            continue
        aucs.append(binary_auc(pos, proba[:, k]))
    return float(np.mean(aucs)) if aucs else None


def pr_curve(y_true, scores, cls: int):
    """(recall, precision) at every distinct threshold, sweeping from high to low score."""
    y_true = np.asarray(y_true, dtype=np.int64)
    s = np.asarray(scores, dtype=float)
    if s.ndim == 2:
        s = s[:, cls]
    pos = y_true == cls
    if not pos.any():
        log.warning("class %d absent; empty PR curve", cls)
        return []
    order = np.argsort(-s, kind="stable")
    s_sorted, p_sorted = s[order], pos[order]
    tp = np.cumsum(p_sorted)
    fp = np.cumsum(~p_sorted)
    # keep the last index of each run of equal scores
    last = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    recall = tp[last] / pos.sum()
    precision = tp[last] / (tp[last] + fp[last])
    return list(zip(recall.tolist(), precision.tolist()))


def train_val_split(n: int, train_frac: float = 0.75, seed: int = 0, stratify=None):
    """Index arrays ``(train, val)``; ``train`` has ``floor(n * train_frac)`` rows."""
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must be in (0, 1)")
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    rng = np.random.default_rng(seed)
    n_train = int(np.floor(n * train_frac))
    if stratify is None:
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    y = np.asarray(stratify)
    train = []
    for k in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == k))
        train.append(idx[: int(np.floor(len(idx) * train_frac))])
    train = np.sort(np.concatenate(train))
    val = np.setdiff1d(np.arange(n), train)
    return train, val
