"""Binary-classification metrics: ROC curves, AUC, and the seven-column report.

Conventions (pinned here and echoed in report metadata):

* AUC uses the Mann-Whitney form ``P(score+ > score-) + 0.5 * P(tie)``,
  which equals the trapezoidal area under the tie-aware ROC curve.
* Thresholding is strict: a row is predicted positive iff ``score > t``.
* Precision with zero positive predictions is reported as 0.0 and flagged
  (``precision_undefined``), never raised, so subgroup sweeps stay total.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import SingleClassError

TABLE_COLUMNS = (
    "accuracy",
    "auc",
    "precision",
    "recall",
    "f1_binary",
    "f1_macro",
    "specificity",
)


def _as_arrays(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels


def roc_auc(scores, labels):
    """Area under the ROC curve with half credit for ties.

    Parameters
    ----------
    scores : array-like of float
        Decision values; higher means more likely positive.
    labels : array-like of bool
        True outcome per row.

    Returns
    -------
    float
        ``P(score+ > score-) + 0.5 * P(score+ == score-)`` over all
        positive/negative pairs.

    Raises
    ------
    SingleClassError
        If only one class is present (AUC undefined; distinct from any
        numeric answer).
    """
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC undefined: only one class present")
    ranks = rankdata(scores)  # average ranks implement the tie credit
    rank_sum = ranks[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels):
    """Tie-aware ROC curve: one vertex per distinct score plus endpoints.

    Returns a list of ``(fpr, tpr, threshold)`` triples ordered from (0, 0)
    to (1, 1). The threshold of a vertex is the smallest score still
    predicted positive there (``+inf`` for the (0, 0) vertex); prediction
    uses the strict ``score > t`` rule. The trapezoid area under the curve
    equals :func:`roc_auc` to 1e-12.
    """
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC undefined: only one class present")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_pos = labels[order].astype(float)
    # group boundaries: last index of each run of equal scores
    boundary = np.nonzero(np.diff(sorted_scores))[0]
    last = np.concatenate([boundary, [scores.size - 1]])
    tp = np.cumsum(sorted_pos)[last]
    fp = (last + 1) - tp
    curve = [(0.0, 0.0, float("inf"))]
    for i, idx in enumerate(last):
        curve.append((fp[i] / n_neg, tp[i] / n_pos, float(sorted_scores[idx])))
    return curve


def roc_curve_area(curve):
    """Trapezoidal area under an ROC curve returned by :func:`roc_curve`."""
    fpr = np.array([v[0] for v in curve])
    tpr = np.array([v[1] for v in curve])
    return float(np.trapezoid(tpr, fpr))


@dataclass(frozen=True)
class MetricReport:
    """Seven-column performance report for one classifier on one test set."""

    accuracy: float
    auc: float
    precision: float
    recall: float
    f1_binary: float
    f1_macro: float
    specificity: float
    precision_undefined: bool = field(default=False, compare=False)

    def as_row(self):
        """Values in the canonical column order (see ``TABLE_COLUMNS``)."""
        return [getattr(self, c) for c in TABLE_COLUMNS]

    def as_dict(self):
        d = {c: getattr(self, c) for c in TABLE_COLUMNS}
        d["precision_undefined"] = self.precision_undefined
        return d


def _f1(precision, recall):
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def confusion_metrics(scores, labels, threshold):
    """All seven metrics at a fixed decision threshold (positive iff score > t)."""
    scores, labels = _as_arrays(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("metrics undefined: only one class present")
    pred = scores > threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    fn = n_pos - tp
    tn = n_neg - fp

    undefined = (tp + fp) == 0
    precision = 0.0 if undefined else tp / (tp + fp)
    recall = tp / n_pos
    specificity = tn / n_neg
    accuracy = (tp + tn) / labels.size
    # macro F1: unweighted mean of per-class F1 (negative class mirrors positive)
    neg_precision = 0.0 if (tn + fn) == 0 else tn / (tn + fn)
    f1_pos = _f1(precision, recall)
    f1_neg = _f1(neg_precision, specificity)
    return MetricReport(
        accuracy=accuracy,
        auc=roc_auc(scores, labels),
        precision=precision,
        recall=recall,
        f1_binary=f1_pos,
        f1_macro=0.5 * (f1_pos + f1_neg),
        specificity=specificity,
        precision_undefined=undefined,
    )
