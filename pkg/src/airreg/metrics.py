"""Evaluation metrics.

Rankings break score ties by ascending index so every metric is
deterministic.
"""
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .losses import predict_scores

log = logging.getLogger(__name__)


def _as_indicator(truth, num_labels):
    truth = np.asarray(truth) if not isinstance(truth, list) else truth
    if isinstance(truth, np.ndarray) and truth.ndim == 2:
        return truth.astype(bool)
    if isinstance(truth, np.ndarray) and truth.ndim == 1 and truth.dtype.kind in "iu":
        out = np.zeros((truth.size, num_labels), dtype=bool)
        out[np.arange(truth.size), truth] = True
        return out
    out = np.zeros((len(truth), num_labels), dtype=bool)
    for i, labels in enumerate(truth):
        out[i, list(labels)] = True
    return out


def _ranking(scores):
    """Indices of ``scores`` sorted descending; stable, so ties keep index order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def accuracy(w, data):
    """Fraction of argmax predictions equal to the ground-truth labels."""
    pred = np.argmax(predict_scores(w, data.features), axis=1)
    return float(np.mean(pred == data.eval_labels()))


def precision_recall_at_n(scores, truth, n):
    """Mean per-example precision and recall of the top-``n`` labels.

    Examples with an empty truth set are skipped; returns
    ``(precision, recall, skipped)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    S = np.asarray(scores, dtype=np.float64)
    T = _as_indicator(truth, S.shape[1])
    sizes = T.sum(axis=1)
    keep = sizes > 0
    skipped = int((~keep).sum())
    if skipped:
        log.warning("precision_recall_at_n: skipped %d examples with no labels", skipped)
    S, T, sizes = S[keep], T[keep], sizes[keep]
    if S.shape[0] == 0:
        return 0.0, 0.0, skipped
    top = np.argsort(-S, axis=1, kind="stable")[:, :n]
    hits = np.take_along_axis(T, top, axis=1).sum(axis=1)
    return float(np.mean(hits / n)), float(np.mean(hits / sizes)), skipped


def average_precision(scores, relevant):
    """Mean over relevant items of the precision at their rank."""
    rel = np.asarray(relevant, dtype=bool)[_ranking(scores)]
    total = rel.sum()
    if total == 0:
        return None
    ranks = np.flatnonzero(rel) + 1
    return float(np.mean(np.arange(1, total + 1) / ranks))


def mean_average_precision(scores, truth, axis="label"):
    """mAP over labels (ranking examples per label) or over examples (ranking labels).

    Returns ``(map, skipped)`` where ``skipped`` counts rankings with no
    relevant item.
    """
    S = np.asarray(scores, dtype=np.float64)
    T = _as_indicator(truth, S.shape[1])
    if axis in ("label", "per-label"):
        S, T = S.T, T.T
    elif axis not in ("image", "per-image"):
        raise ValueError("axis must be 'label' or 'image'")
    aps = [average_precision(s, t) for s, t in zip(S, T)]
    kept = [a for a in aps if a is not None]
    skipped = len(aps) - len(kept)
    if skipped:
        log.warning("mean_average_precision: skipped %d rankings with no relevant items", skipped)
    return (float(np.mean(kept)) if kept else 0.0), skipped


def separation_auc(activations, clean_mask):
    """Probability that a clean example out-scores a noisy one (ties count half)."""
    a = np.asarray(activations, dtype=np.float64)
    m = np.asarray(clean_mask, dtype=bool)
    ok = np.isfinite(a)
    a, m = a[ok], m[ok]
    n_clean, n_noisy = int(m.sum()), int((~m).sum())
    if n_clean == 0 or n_noisy == 0:
        return None
    ranks = rankdata(a)
    return float((ranks[m].sum() - n_clean * (n_clean + 1) / 2) / (n_clean * n_noisy))


def _population(values):
    if values.size == 0:
        return None, None
    return float(values.mean()), float(values.std())


def activation_stats(activations, clean_mask):
    a = np.asarray(activations, dtype=np.float64)
    m = np.asarray(clean_mask, dtype=bool)
    ok = np.isfinite(a)
    mc, sc = _population(a[ok & m])
    mn, sn = _population(a[ok & ~m])
    gap = None if mc is None or mn is None else mc - mn
    return {
        "mean_clean": mc, "std_clean": sc, "mean_noisy": mn, "std_noisy": sn,
        "gap": gap, "auc": separation_auc(a, m),
    }


def activation_report(activations, clean_mask, epoch_series=None):
    """Clean-vs-noisy separation of per-example activations.

    Returns None when no clean mask is available.  ``ranking`` lists examples
    by decreasing activation (ties by index).
    """
    if clean_mask is None:
        return None
    a = np.asarray(activations, dtype=np.float64)
    report = activation_stats(a, clean_mask)
    order = _ranking(np.where(np.isfinite(a), a, -np.inf))
    report["ranking"] = [
        {"rank": r + 1, "example": int(i), "activation": float(a[i]), "clean": bool(clean_mask[i])}
        for r, i in enumerate(order)
    ]
    report["epochs"] = [
        dict(epoch=e + 1, **activation_stats(series, clean_mask))
        for e, series in enumerate(epoch_series or [])
    ]
    return report


@dataclass
class MetricsReport:
    accuracy: float = None
    precision_recall: list = field(default_factory=list)
    map_label: float = None
    map_image: float = None
    activation: dict = None
    objective: float = None
    residuals: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)
