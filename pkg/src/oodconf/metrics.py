"""Detection metrics and threshold calibration.

Orientation is fixed across the toolkit: higher score means more
in-distribution, in-distribution is the positive class, and a sample is
flagged OOD when its score is <= the threshold (the boundary counts as
out).

All threshold-based quantities are minimized exactly over a finite
candidate set: the midpoints between adjacent distinct pooled scores plus
-inf/+inf sentinels. Every metric is rank-based, hence invariant under
strictly monotone score transforms and permutations of either list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class CalibrationError(Exception):
    """Threshold calibration is impossible on the given data."""


@dataclass
class MetricReport:
    fpr_at_95_tpr: float
    detection_error: float
    auroc: float
    aupr_in: float
    aupr_out: float
    calibrated_delta: float

    def to_dict(self) -> dict:
        return {
            "fpr_at_95_tpr": self.fpr_at_95_tpr,
            "detection_error": self.detection_error,
            "auroc": self.auroc,
            "aupr_in": self.aupr_in,
            "aupr_out": self.aupr_out,
            "delta": _json_float(self.calibrated_delta),
        }


def _json_float(x: float):
    """Infinities as strings so report files stay valid JSON."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def detect(score: float, delta: float) -> bool:
    """True = flagged out-of-distribution (score <= delta)."""
    return score <= delta


def _as_scores(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    return arr


def candidate_thresholds(in_scores, out_scores) -> np.ndarray:
    """Midpoints of adjacent distinct pooled scores, with +-inf sentinels."""
    pooled = np.unique(np.concatenate([in_scores, out_scores]))
    mids = (pooled[:-1] + pooled[1:]) / 2.0
    return np.concatenate(([-np.inf], mids, [np.inf]))


def _frac_leq(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Fraction of scores <= each threshold; scores must be pre-sorted."""
    counts = np.searchsorted(sorted_scores, thresholds, side="right")
    return counts / sorted_scores.size


def fpr_at_tpr(in_scores, out_scores, level: float = 0.95) -> float:
    """Minimum FPR over thresholds that keep TPR >= level.

    Positives are in-distribution; a sample tests positive when its score
    is strictly above the threshold. Empirical rates, no interpolation.
    """
    in_s = np.sort(_as_scores(in_scores, "in_scores"))
    out_s = np.sort(_as_scores(out_scores, "out_scores"))
    thr = candidate_thresholds(in_s, out_s)
    tpr = 1.0 - _frac_leq(in_s, thr)
    fpr = 1.0 - _frac_leq(out_s, thr)
    feasible = tpr >= level - 1e-12
    return float(fpr[feasible].min())


def detection_error(in_scores, out_scores) -> float:
    """min over thresholds of 0.5*P_in(score <= t) + 0.5*P_out(score > t)."""
    in_s = np.sort(_as_scores(in_scores, "in_scores"))
    out_s = np.sort(_as_scores(out_scores, "out_scores"))
    thr = candidate_thresholds(in_s, out_s)
    err = 0.5 * _frac_leq(in_s, thr) + 0.5 * (1.0 - _frac_leq(out_s, thr))
    return float(err.min())


def auroc(in_scores, out_scores) -> float:
    """Probability that an in-distribution score exceeds an OOD score.

    Computed as the pairwise rank statistic with half credit for ties.
    """
    in_s = _as_scores(in_scores, "in_scores")
    out_s = np.sort(_as_scores(out_scores, "out_scores"))
    below = np.searchsorted(out_s, in_s, side="left")
    below_or_eq = np.searchsorted(out_s, in_s, side="right")
    wins = below.sum() + 0.5 * (below_or_eq - below).sum()
    return float(wins / (in_s.size * out_s.size))


def aupr(pos_scores, neg_scores) -> float:
    """Step-integrated average precision over distinct score thresholds."""
    pos = np.sort(_as_scores(pos_scores, "pos_scores"))
    neg = np.sort(_as_scores(neg_scores, "neg_scores"))
    # thresholds descending; predict positive when score >= threshold
    values = np.unique(np.concatenate([pos, neg]))[::-1]
    tp = pos.size - np.searchsorted(pos, values, side="left")
    fp = neg.size - np.searchsorted(neg, values, side="left")
    recall = tp / pos.size
    precision = tp / (tp + fp)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_recall) * precision).sum())


def aupr_in(in_scores, out_scores) -> float:
    """AUPR with in-distribution as the positive class."""
    return aupr(in_scores, out_scores)


def aupr_out(in_scores, out_scores) -> float:
    """AUPR with OOD as the positive class (scores negated so that higher
    still means positive)."""
    in_s = _as_scores(in_scores, "in_scores")
    out_s = _as_scores(out_scores, "out_scores")
    return aupr(-out_s, -in_s)


def calibrate_threshold(in_scores, out_scores) -> float:
    """Threshold minimizing detection error; ties go to the larger value.

    The larger-tie rule yields the more conservative detector. When every
    threshold is equal-cost (e.g. identical score lists) this returns +inf,
    the degenerate flag-everything detector.
    """
    in_s = np.sort(_as_scores(in_scores, "in_scores"))
    out_s = np.sort(_as_scores(out_scores, "out_scores"))
    thr = candidate_thresholds(in_s, out_s)
    err = 0.5 * _frac_leq(in_s, thr) + 0.5 * (1.0 - _frac_leq(out_s, thr))
    best_rev = err.size - 1 - int(np.argmin(err[::-1]))
    return float(thr[best_rev])


def calibrate_threshold_misclassified(records, score: str = "confidence") -> float:
    """Calibrate on a labeled holdout: correct vs misclassified samples.

    `records` are EvalRecords; `score` selects the detector score field
    ("confidence" or "max_softmax"). Misclassified samples stand in for
    OOD examples.
    """
    if score not in ("confidence", "max_softmax"):
        raise ValueError(f"unknown score field {score!r}")
    correct = [getattr(r, score) for r in records if r.correct]
    incorrect = [getattr(r, score) for r in records if not r.correct]
    if not correct or not incorrect:
        raise CalibrationError(
            "cannot calibrate: holdout needs at least one correct and one "
            "misclassified sample"
        )
    return calibrate_threshold(correct, incorrect)


def metric_report(in_scores, out_scores) -> MetricReport:
    """All five detection metrics plus the calibrated threshold."""
    return MetricReport(
        fpr_at_95_tpr=fpr_at_tpr(in_scores, out_scores, 0.95),
        detection_error=detection_error(in_scores, out_scores),
        auroc=auroc(in_scores, out_scores),
        aupr_in=aupr_in(in_scores, out_scores),
        aupr_out=aupr_out(in_scores, out_scores),
        calibrated_delta=calibrate_threshold(in_scores, out_scores),
    )
