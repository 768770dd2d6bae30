"""Evaluation metrics, fold confidence intervals, and agreement statistics.

All classification metrics are percentages. Macro precision and macro F1
average over all K classes, with classes never predicted (or never
occurring) contributing zero; balanced accuracy averages recall over the
classes present in the true labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InputError, UndefinedAlphaError

N_CLASSES = 5
Z_95 = 1.96


@dataclass(frozen=True)
class MetricSet:
    """Accuracy family, all in percent."""

    accuracy: float
    balanced_accuracy: float
    acceptable_accuracy: float
    macro_precision: float
    macro_f1: float

    def __post_init__(self):
        for name in ("accuracy", "balanced_accuracy", "acceptable_accuracy",
                     "macro_precision", "macro_f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name}={v} outside [0, 100]")
        if self.acceptable_accuracy < self.accuracy - 1e-9:
            raise ValueError("acceptable accuracy cannot undercut accuracy")

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "balanced_accuracy": self.balanced_accuracy,
            "acceptable_accuracy": self.acceptable_accuracy,
            "macro_precision": self.macro_precision,
            "macro_f1": self.macro_f1,
        }


METRIC_NAMES = ("accuracy", "balanced_accuracy", "acceptable_accuracy",
                "macro_precision", "macro_f1")


def compute_metrics(y_true, y_pred, n_classes: int = N_CLASSES) -> MetricSet:
    """Score predictions against true labels.

    Per-class precision is zero for classes that receive no predictions;
    per-class F1 uses the standard ``2PR / (P + R)`` harmonic mean.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise InputError("cannot score an empty label set")
    if y_true.shape != y_pred.shape:
        raise InputError("true and predicted labels must have equal length")
    if y_true.min() < 0 or y_true.max() >= n_classes or y_pred.min() < 0 or y_pred.max() >= n_classes:
        raise InputError(f"labels must lie in 0..{n_classes - 1}")

    n = y_true.size
    accuracy = float(np.mean(y_true == y_pred))
    acceptable = float(np.mean(np.abs(y_true - y_pred) <= 1))

    recalls = []
    precisions = np.zeros(n_classes)
    f1s = np.zeros(n_classes)
    for c in range(n_classes):
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        support = int(np.sum(y_true == c))
        predicted = int(np.sum(y_pred == c))
        recall = tp / support if support else 0.0
        if support:
            recalls.append(recall)
        precisions[c] = tp / predicted if predicted else 0.0
        denom = precisions[c] + recall
        f1s[c] = 2.0 * precisions[c] * recall / denom if denom > 0 else 0.0

    return MetricSet(
        accuracy=100.0 * accuracy,
        balanced_accuracy=100.0 * float(np.mean(recalls)),
        acceptable_accuracy=100.0 * acceptable,
        macro_precision=100.0 * float(precisions.mean()),
        macro_f1=100.0 * float(f1s.mean()),
    )


def baseline_metrics(dist, kind: str, n_classes: int = N_CLASSES) -> MetricSet:
    """Reference rows computable from a label distribution alone.

    ``majority`` always predicts the most frequent class and is evaluated
    deterministically. ``random_guess`` assigns classes uniformly at random;
    accuracy, balanced accuracy, macro precision and macro F1 sit at the
    chance level 100/K, while acceptable accuracy is the exact expectation
    under the given distribution.
    """
    counts = np.asarray(dist, dtype=float)
    if counts.ndim != 1 or len(counts) != n_classes:
        raise InputError(f"need {n_classes} class counts")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise InputError("class counts must be nonnegative and not all zero")
    n = counts.sum()

    if kind == "majority":
        majority = int(np.argmax(counts))
        y_true = np.repeat(np.arange(n_classes), counts.astype(int))
        y_pred = np.full(y_true.shape, majority)
        return compute_metrics(y_true, y_pred, n_classes)
    if kind == "random_guess":
        within_one = np.array(
            [sum(1 for j in range(n_classes) if abs(i - j) <= 1) for i in range(n_classes)]
        )
        chance = 100.0 / n_classes
        acceptable = 100.0 * float(np.dot(counts, within_one) / (n_classes * n))
        return MetricSet(
            accuracy=chance,
            balanced_accuracy=chance,
            acceptable_accuracy=acceptable,
            macro_precision=chance,
            macro_f1=chance,
        )
    raise InputError(f"unknown baseline kind {kind!r}")


def confidence_interval(values):
    """95% normal confidence interval for the mean of per-fold values."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise InputError("confidence interval needs at least 2 fold values")
    mean = float(values.mean())
    half = Z_95 * float(values.std(ddof=1)) / math.sqrt(values.size)
    return mean - half, mean + half


def wilcoxon_signed_rank(a, b):
    """Two-sided signed-rank p-value for paired per-subject scores.

    Zero differences are dropped. Up to n = 20 the p-value is exact over
    all 2^n sign assignments of the (tie-averaged) ranks; beyond that a
    normal approximation with tie correction is used. Identical vectors
    give p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InputError("paired score vectors must have equal length")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        return 1.0
    n = d.size
    if n < 5:
        raise InputError(f"need at least 5 nonzero differences, got {n}")
    ranks = rankdata(np.abs(d))
    w_pos = float(ranks[d > 0].sum())

    if n <= 20:
        # Average ranks are multiples of 1/2; doubling makes them integers.
        scaled = np.round(2 * ranks).astype(int)
        total = scaled.sum()
        dist = np.zeros(total + 1)
        dist[0] = 1.0
        for r in scaled:
            shifted = np.zeros_like(dist)
            shifted[r:] = dist[: dist.size - r]
            dist = dist + shifted
        dist /= 2.0**n
        w2 = int(round(2 * w_pos))
        p_le = float(dist[: w2 + 1].sum())
        p_ge = float(dist[w2:].sum())
        return min(1.0, 2.0 * min(p_le, p_ge))

    mu = n * (n + 1) / 4.0
    tie_term = 0.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    sigma = math.sqrt(n * (n + 1) * (2 * n + 1) / 24.0 - tie_term)
    z = (w_pos - mu) / sigma
    return float(math.erfc(abs(z) / math.sqrt(2.0)))


def krippendorff_alpha(ratings, metric: str = "ordinal"):
    """Krippendorff's alpha for a rater-by-item matrix with missing entries.

    ``ratings`` is a 2-D array with one row per rater and one column per
    item; missing ratings are NaN. Items rated fewer than twice cannot be
    paired and are ignored. Uses the ordinal difference metric.
    """
    if metric != "ordinal":
        raise InputError(f"unsupported metric {metric!r}")
    ratings = np.asarray(ratings, dtype=float)
    if ratings.ndim != 2:
        raise InputError("ratings must be a rater-by-item matrix")

    pairable = []
    for col in ratings.T:
        vals = col[~np.isnan(col)]
        if vals.size >= 2:
            pairable.append(vals)
    if len(pairable) < 2:
        raise UndefinedAlphaError("need at least 2 items with 2 or more ratings")

    categories = np.unique(np.concatenate(pairable))
    index = {v: i for i, v in enumerate(categories)}
    k = len(categories)
    coincidence = np.zeros((k, k))
    for vals in pairable:
        m = vals.size
        counts = np.zeros(k)
        for v in vals:
            counts[index[v]] += 1
        for c in range(k):
            for d in range(k):
                pairs = counts[c] * (counts[d] - (1 if c == d else 0))
                coincidence[c, d] += pairs / (m - 1)

    n_c = coincidence.sum(axis=1)
    n_total = n_c.sum()
    d_obs = 0.0
    d_exp = 0.0
    for c in range(k):
        for d in range(c + 1, k):
            delta = (n_c[c : d + 1].sum() - (n_c[c] + n_c[d]) / 2.0) ** 2
            d_obs += coincidence[c, d] * delta
            d_exp += n_c[c] * n_c[d] * delta
    if d_exp == 0.0:
        return 1.0
    return float(1.0 - (n_total - 1.0) * d_obs / d_exp)
