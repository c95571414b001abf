"""Per-subject overlap metrics: confusion counts, DSC, nDSC, PR curves.

The normalised Dice score rescales the false-positive term of the Dice
denominator by ``kappa = h * (1/r - 1)``, where ``h`` is the ground truth's
positive:negative voxel ratio and ``r`` a fixed reference rate. At a
decision threshold of 0 this pins the precision to ``r`` for every subject,
which removes the head start that high-load subjects get under plain DSC.

All scores are computed in the division-safe form ``2*tp / (2*tp + k*fp + fn)``,
which equals the ratio form ``2 / (2 + k*p + n)`` whenever ``tp > 0`` and
stays defined when it is 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .volume import BinaryMask, ProbabilityMap

BOTH_EMPTY_IS_ONE = "both_empty_is_one"
BOTH_EMPTY_IS_ERROR = "both_empty_is_error"

DEFAULT_REFERENCE_R = 0.001


@dataclass(frozen=True)
class ConfusionCounts:
    """Voxel-level confusion counts for one subject."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricConfig:
    """Scoring configuration.

    ``reference_r`` is the target precision at recall 1.0, conventionally the
    mean positive-class fraction of a training cohort. ``empty_convention``
    controls the tp+fp+fn == 0 case (both masks empty). The threshold rule
    is fixed: a voxel is predicted positive iff its probability >= t, so a
    threshold of 0 predicts everything positive.
    """

    reference_r: float = DEFAULT_REFERENCE_R
    empty_convention: str = BOTH_EMPTY_IS_ONE

    def __post_init__(self):
        if not 0.0 < self.reference_r < 1.0:
            raise ValidationError(
                f"reference_r must lie in (0, 1), got {self.reference_r}"
            )
        if self.empty_convention not in (BOTH_EMPTY_IS_ONE, BOTH_EMPTY_IS_ERROR):
            raise ValidationError(
                f"unknown empty_convention {self.empty_convention!r}"
            )


@dataclass(frozen=True)
class SubjectMetrics:
    """Everything the cohort report needs about one subject.

    ``p_ratio`` (FP/TP) and ``n_ratio`` (FN/TP) are None when TP is 0.
    """

    lesion_load: float
    h: float
    kappa: float
    dsc: float
    ndsc: float
    precision: float
    recall: float
    p_ratio: Optional[float]
    n_ratio: Optional[float]


@dataclass(frozen=True)
class PrCurve:
    """Precision/recall at strictly decreasing thresholds."""

    thresholds: tuple[float, ...]
    precisions: tuple[float, ...]
    recalls: tuple[float, ...]

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds, self.precisions, self.recalls))


def confusion(gt: BinaryMask, pred: BinaryMask,
              roi: Optional[BinaryMask] = None) -> ConfusionCounts:
    """Count TP/FP/FN/TN voxels, optionally restricted to a region of interest."""
    if gt.dims != pred.dims:
        raise ValidationError(
            f"dimension mismatch: ground truth {gt.dims} vs prediction {pred.dims}"
        )
    g, p = gt.bits, pred.bits
    if roi is not None:
        if roi.dims != gt.dims:
            raise ValidationError(
                f"dimension mismatch: roi {roi.dims} vs ground truth {gt.dims}"
            )
        m = roi.bits
        g, p = g & m, p & m
        total = int(np.count_nonzero(m))
    else:
        total = g.size
    tp = int(np.count_nonzero(g & p))
    fp = int(np.count_nonzero(~g & p))
    fn = int(np.count_nonzero(g & ~p))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=total - tp - fp - fn)


def class_ratio(gt: BinaryMask, roi: Optional[BinaryMask] = None) -> float:
    """Positive:negative voxel ratio ``h`` of a ground-truth mask."""
    if roi is not None:
        if roi.dims != gt.dims:
            raise ValidationError("dimension mismatch between mask and roi")
        bits = gt.bits & roi.bits
        total = int(np.count_nonzero(roi.bits))
    else:
        bits = gt.bits
        total = bits.size
    pos = int(np.count_nonzero(bits))
    neg = total - pos
    if neg == 0:
        raise ValidationError("ground truth has no negative voxels; h is undefined")
    return pos / neg


def lesion_load(gt: BinaryMask, roi: Optional[BinaryMask] = None) -> float:
    """Positive fraction of the ground truth (equals h / (1 + h))."""
    if roi is not None:
        if roi.dims != gt.dims:
            raise ValidationError("dimension mismatch between mask and roi")
        bits = gt.bits & roi.bits
        total = int(np.count_nonzero(roi.bits))
    else:
        bits = gt.bits
        total = bits.size
    if total == 0:
        raise ValidationError("empty region of interest")
    return int(np.count_nonzero(bits)) / total


def kappa(h: float, r: float) -> float:
    """False-positive scaling factor ``h * (1/r - 1)``."""
    if not 0.0 < r < 1.0:
        raise ValidationError(f"reference value r must lie in (0, 1), got {r}")
    if h < 0:
        raise ValidationError(f"class ratio h must be non-negative, got {h}")
    return h * (1.0 / r - 1.0)


def _empty_score(cfg: MetricConfig) -> float:
    if cfg.empty_convention == BOTH_EMPTY_IS_ERROR:
        raise ValidationError(
            "score undefined: ground truth and prediction are both empty "
            "(tp + fp + fn == 0) under both_empty_is_error"
        )
    return 1.0


def dsc(c: ConfusionCounts, cfg: MetricConfig = MetricConfig()) -> float:
    """Dice similarity coefficient ``2*tp / (2*tp + fp + fn)``."""
    if c.tp + c.fp + c.fn == 0:
        return _empty_score(cfg)
    return 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn)


def ndsc(c: ConfusionCounts, h: float, cfg: MetricConfig = MetricConfig()) -> float:
    """Normalised Dice: the fp term is scaled by kappa(h, reference_r)."""
    if c.tp + c.fp + c.fn == 0:
        return _empty_score(cfg)
    if h == 0.0 and c.fp > 0:
        raise ValidationError(
            "nDSC undefined for empty ground truth with non-empty prediction"
        )
    k = kappa(h, cfg.reference_r)
    return 2.0 * c.tp / (2.0 * c.tp + k * c.fp + c.fn)


def precision(c: ConfusionCounts, cfg: MetricConfig = MetricConfig()) -> float:
    """``tp / (tp + fp)``; 0 when that denominator is 0 but fn > 0."""
    if c.tp + c.fp == 0:
        return 0.0 if c.fn > 0 else _empty_score(cfg)
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts, cfg: MetricConfig = MetricConfig()) -> float:
    """``tp / (tp + fn)``; 0 when that denominator is 0 but fp > 0."""
    if c.tp + c.fn == 0:
        return 0.0 if c.fp > 0 else _empty_score(cfg)
    return c.tp / (c.tp + c.fn)


def dsc_from_pr(precision_value: float, recall_value: float) -> float:
    """Dice as the harmonic mean of precision and recall."""
    for name, v in (("precision", precision_value), ("recall", recall_value)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {v}")
    if precision_value == 0.0 and recall_value == 0.0:
        raise ValidationError("dsc undefined when precision and recall are both 0")
    return 2.0 * recall_value * precision_value / (recall_value + precision_value)


def binarize(pm: ProbabilityMap, threshold: float) -> BinaryMask:
    """Predict positive iff prob >= threshold (threshold 0 -> all positive)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold must lie in [0, 1], got {threshold}")
    return BinaryMask(pm.probs >= threshold)


def _normalise_thresholds(thresholds: Sequence[float], require_zero: bool) -> list[float]:
    ts = sorted({float(t) for t in thresholds}, reverse=True)
    if not ts:
        raise ValidationError("no thresholds given")
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise ValidationError(f"threshold {t} outside [0, 1]")
    if require_zero and ts[-1] != 0.0:
        raise ValidationError("threshold list must include 0")
    return ts


def pr_curve(gt: BinaryMask, pm: ProbabilityMap,
             thresholds: Sequence[float]) -> PrCurve:
    """PR points at strictly decreasing thresholds; the list must include 0.

    At threshold 0 everything is predicted positive, so recall is 1 and
    precision equals the subject's lesion load.
    """
    if gt.positive_count() == 0:
        raise ValidationError("pr_curve undefined for empty ground truth")
    if gt.dims != pm.dims:
        raise ValidationError(
            f"dimension mismatch: ground truth {gt.dims} vs probability map {pm.dims}"
        )
    ts = _normalise_thresholds(thresholds, require_zero=True)
    precs, recs = [], []
    for t in ts:
        c = confusion(gt, binarize(pm, t))
        precs.append(precision(c))
        recs.append(recall(c))
    return PrCurve(thresholds=tuple(ts), precisions=tuple(precs), recalls=tuple(recs))


def metric_sweep(gt: BinaryMask, pm: ProbabilityMap, thresholds: Sequence[float],
                 cfg: MetricConfig = MetricConfig()) -> list[tuple[float, float, float]]:
    """(threshold, dsc, ndsc) rows at strictly decreasing thresholds."""
    if gt.positive_count() == 0:
        raise ValidationError("metric sweep undefined for empty ground truth")
    if gt.dims != pm.dims:
        raise ValidationError(
            f"dimension mismatch: ground truth {gt.dims} vs probability map {pm.dims}"
        )
    h = class_ratio(gt)
    rows = []
    for t in _normalise_thresholds(thresholds, require_zero=False):
        c = confusion(gt, binarize(pm, t))
        rows.append((t, dsc(c, cfg), ndsc(c, h, cfg)))
    return rows


def evaluate_pair(gt: BinaryMask, pred: BinaryMask,
                  cfg: MetricConfig = MetricConfig(),
                  roi: Optional[BinaryMask] = None) -> SubjectMetrics:
    """Full per-subject scoring of a binary prediction against ground truth."""
    c = confusion(gt, pred, roi)
    if c.tp + c.fn == 0:
        # empty ground truth: either the both-empty convention or an error
        if c.fp > 0:
            raise ValidationError(
                "nDSC undefined for empty ground truth with non-empty prediction"
            )
        score = _empty_score(cfg)
        return SubjectMetrics(
            lesion_load=0.0, h=0.0, kappa=0.0,
            dsc=score, ndsc=score, precision=score, recall=score,
            p_ratio=None, n_ratio=None,
        )
    h = class_ratio(gt, roi)
    k = kappa(h, cfg.reference_r)
    return SubjectMetrics(
        lesion_load=lesion_load(gt, roi),
        h=h,
        kappa=k,
        dsc=dsc(c, cfg),
        ndsc=ndsc(c, h, cfg),
        precision=precision(c, cfg),
        recall=recall(c, cfg),
        p_ratio=(c.fp / c.tp) if c.tp > 0 else None,
        n_ratio=(c.fn / c.tp) if c.tp > 0 else None,
    )
