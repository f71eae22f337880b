"""Detection metrics from per-flow scores: TPR/FPR, ROC, AUC and EER.

Labels are 1 (malicious, positive) and 0 (benign).  A flow is flagged when
its score is at least the threshold.
"""
from __future__ import annotations

import csv
from typing import TextIO

import numpy as np
from scipy.stats import rankdata

from .errors import FreqDetectError


class MetricError(FreqDetectError, ValueError):
    pass


class NoPositives(MetricError):
    pass


class NoNegatives(MetricError):
    pass


class SingleClass(MetricError):
    pass


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if len(scores) == 0:
        raise ValueError("no scores")
    return scores, labels


def _both(scores, labels):
    scores, labels = _check(scores, labels)
    if labels.all() or not labels.any():
        raise SingleClass("both benign and malicious labels are required")
    return scores, labels


def confusion_at(scores, labels, threshold: float) -> tuple[float, float]:
    """(TPR, FPR) with positives = score >= threshold."""
    scores, labels = _check(scores, labels)
    flagged = scores >= threshold
    n_pos, n_neg = labels.sum(), (~labels).sum()
    if n_pos == 0:
        raise NoPositives("TPR undefined without malicious samples")
    if n_neg == 0:
        raise NoNegatives("FPR undefined without benign samples")
    return float((flagged & labels).sum() / n_pos), float((flagged & ~labels).sum() / n_neg)


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(malicious > benign) + 0.5 P(tie)."""
    scores, labels = _both(scores, labels)
    ranks = rankdata(scores)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> np.ndarray:
    """Operating points (FPR, TPR), one per distinct score, from (0,0) to (1,1)."""
    scores, labels = _both(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each run of equal scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tpr = np.r_[0.0, tp[last] / y.sum()]
    fpr = np.r_[0.0, fp[last] / (~y).sum()]
    return np.column_stack([fpr, tpr])


def roc_auc_trapezoid(roc) -> float:
    roc = np.asarray(roc)
    return float(np.sum(np.diff(roc[:, 0]) * (roc[1:, 1] + roc[:-1, 1]) / 2.0))


def eer(scores, labels) -> float:
    """Equal error rate, interpolated linearly between bracketing ROC points."""
    roc = roc_curve(scores, labels)
    fpr, fnr = roc[:, 0], 1.0 - roc[:, 1]
    g = fpr - fnr
    i = int(np.argmax(g >= 0))
    if g[i] == 0 or i == 0:
        return float(fpr[i])
    t = -g[i - 1] / (g[i] - g[i - 1])
    return float(fpr[i - 1] + t * (fpr[i] - fpr[i - 1]))


def write_roc_csv(roc, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["fpr", "tpr"])
    for f, t in np.asarray(roc):
        w.writerow([repr(float(f)), repr(float(t))])
