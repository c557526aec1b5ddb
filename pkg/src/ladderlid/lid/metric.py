"""Challenge scoring and out-of-set ratio post-processing."""

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class ChallengeMetric:
    k: int
    p_oos: float = 0.23
    scale: float = 100.0

    def __post_init__(self):
        if not 0.0 <= self.p_oos <= 1.0:
            raise ValueError(f"p_oos must lie in [0, 1], got {self.p_oos}")


def per_class_error(predictions, truth, k):
    """Error rate for each class 0..k (k = out-of-set); NaN where a class has no trials."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError(f"{predictions.size} predictions vs {truth.size} truth labels")
    trials = np.bincount(truth, minlength=k + 1)[:k + 1]
    errors = np.bincount(truth[predictions != truth], minlength=k + 1)[:k + 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(trials > 0, errors / np.maximum(trials, 1), np.nan)


def challenge_cost(predictions, truth, metric):
    """Weighted mean of per-class error rates; the out-of-set class gets weight p_oos."""
    rates = per_class_error(predictions, truth, metric.k)
    missing = np.flatnonzero(np.isnan(rates))
    if missing.size:
        warnings.warn(f"classes {missing.tolist()} have no trials; counted as zero error",
                      stacklevel=2)
        rates = np.nan_to_num(rates, nan=0.0)
    # fsum keeps the result independent of summation order
    inset = (1.0 - metric.p_oos) / metric.k * math.fsum(rates[:metric.k].tolist())
    return float(metric.scale * (inset + metric.p_oos * float(rates[metric.k])))


def postprocess_oos(posteriors, p_oos, n=None):
    """Argmax decisions adjusted so the out-of-set count matches round(p_oos * n).

    Too few oos decisions: rows whose best in-set posterior is smallest are
    relabeled oos. Too many: the oos posterior is scaled by the largest bias
    in (0, 1] that brings the count down to the target.
    """
    post = np.asarray(posteriors, dtype=np.float64)
    rows, cols = post.shape
    k = cols - 1
    n = rows if n is None else n
    target = int(round(p_oos * n))
    labels = post.argmax(axis=1)
    is_oos = labels == k
    count = int(is_oos.sum())
    if count < target:
        best_in = post[:, :k].max(axis=1)
        cand = np.flatnonzero(~is_oos)
        order = cand[np.argsort(best_in[cand], kind="stable")]
        labels = labels.copy()
        labels[order[:target - count]] = k
    elif count > target:
        # a row stays oos under bias b iff b * p_oos_row > best in-set posterior,
        # i.e. iff its ratio best_in / p_oos_row is below b; the largest bias
        # keeping at most `target` rows is the (target+1)-th smallest ratio.
        # Assign directly from the ordering to avoid rounding at the threshold.
        rows_oos = np.flatnonzero(is_oos)
        ratio = post[rows_oos, :k].max(axis=1) / post[rows_oos, k]
        demote = rows_oos[np.argsort(ratio, kind="stable")[target:]]
        labels = labels.copy()
        labels[demote] = post[demote, :k].argmax(axis=1)
    return labels
