"""Cohort evaluation: manifests, per-subject scoring, and the bias report.

A manifest is a CSV (``id,gt_path,pred_path,pred_kind``) listing one
subject per row; relative paths resolve against the manifest's directory.
The report pairs per-subject scores with cohort-level bias statistics:
rank correlations of each metric against lesion load, a rank-regression
slope, load-stratified subset means, and a load histogram. Subjects that
cannot be scored (unreadable files, empty ground truth with a non-empty
prediction, ...) are listed under ``skipped`` with a reason instead of
being silently dropped, and are excluded from the correlations.
"""

from __future__ import annotations

import csv
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import nifti
from .errors import ValidationError
from .metrics import MetricConfig, SubjectMetrics, binarize, evaluate_pair, lesion_load
from .rankstats import kendall_tau, rank_regression, spearman
from .volume import BinaryMask, as_binary_mask, as_probability_map

PRED_BINARY = "binary"
PRED_PROBABILITY = "probability"

MANIFEST_COLUMNS = ("id", "gt_path", "pred_path", "pred_kind")


@dataclass(frozen=True)
class SubjectRef:
    id: str
    gt_path: Path
    pred_path: Path
    pred_kind: str = PRED_BINARY


@dataclass(frozen=True)
class CohortManifest:
    subjects: tuple[SubjectRef, ...]
    threshold: Optional[float] = None

    def __post_init__(self):
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate subject ids in manifest: {dupes}")
        for s in self.subjects:
            if not str(s.gt_path) or not str(s.pred_path):
                raise ValidationError(f"subject {s.id!r} has an empty path")
            if s.pred_kind not in (PRED_BINARY, PRED_PROBABILITY):
                raise ValidationError(
                    f"subject {s.id!r}: unknown pred_kind {s.pred_kind!r}"
                )
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold must lie in [0, 1], got {self.threshold}")

    def needs_threshold(self) -> bool:
        return any(s.pred_kind == PRED_PROBABILITY for s in self.subjects)


@dataclass
class CohortReport:
    reference_r: float
    threshold: Optional[float]
    per_subject: list[tuple[str, SubjectMetrics]]  # (id, metrics), sorted by id
    summary: dict                                  # subset name -> {mean_dsc, mean_ndsc}
    subsets: dict                                  # subset name -> [ids]
    bias: dict                                     # metric name -> stats or error
    load_histogram: Optional[dict]                 # {edges, counts}
    skipped: list[dict] = field(default_factory=list)


def read_manifest(path: Union[str, PathLike]) -> CohortManifest:
    """Parse a manifest CSV; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"manifest {path} is empty") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ValidationError(
                f"manifest header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {','.join(header)}"
            )
        subjects = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise ValidationError(f"manifest line {lineno}: expected 4 fields")
            sid, gt, pred, kind = (cell.strip() for cell in row)
            subjects.append(SubjectRef(
                id=sid,
                gt_path=(base / gt).resolve() if not Path(gt).is_absolute() else Path(gt),
                pred_path=(base / pred).resolve() if not Path(pred).is_absolute() else Path(pred),
                pred_kind=kind,
            ))
    return CohortManifest(subjects=tuple(subjects))


def write_manifest(manifest: CohortManifest, path: Union[str, PathLike]) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for s in manifest.subjects:
            writer.writerow([s.id, _relative_to(s.gt_path, path.parent),
                             _relative_to(s.pred_path, path.parent), s.pred_kind])


def _relative_to(p: Path, base: Path) -> str:
    try:
        return str(Path(p).resolve().relative_to(base.resolve()))
    except ValueError:
        return str(p)


def estimate_reference(gt_masks: Sequence[BinaryMask]) -> float:
    """Mean lesion load across ground truths (the reference value r)."""
    if not gt_masks:
        raise ValidationError("cannot estimate a reference from an empty list")
    loads = [lesion_load(m) for m in gt_masks]
    r = float(np.mean(loads))
    if r == 0.0:
        warnings.warn(
            "estimated reference is 0.0 (all ground truths empty); "
            "a usable reference must lie in (0, 1)",
            stacklevel=2,
        )
    return r


def _load_subject(ref: SubjectRef, threshold: Optional[float],
                  cfg: MetricConfig) -> SubjectMetrics:
    gt = as_binary_mask(nifti.read_nifti_file(ref.gt_path))
    if gt.positive_count() == 0:
        # load and nDSC are meaningless for lesion-free scans; the subject is
        # reported under `skipped` rather than scored by convention
        raise ValidationError("empty ground truth mask")
    if ref.pred_kind == PRED_PROBABILITY:
        if threshold is None:
            raise ValidationError(
                f"subject {ref.id!r} has a probability prediction but no "
                "threshold was given"
            )
        pred = binarize(as_probability_map(nifti.read_nifti_file(ref.pred_path)),
                        threshold)
    else:
        pred = as_binary_mask(nifti.read_nifti_file(ref.pred_path))
    return evaluate_pair(gt, pred, cfg)


def evaluate_cohort(manifest: CohortManifest,
                    cfg: MetricConfig = MetricConfig(),
                    bins: int = 10,
                    jobs: int = 1,
                    progress: bool = False) -> CohortReport:
    """Score every subject and assemble the bias report.

    Per-subject failures become ``skipped`` entries; the summary, bias block
    and histogram are computed over the successfully scored subjects only.
    Results are deterministic regardless of ``jobs``.
    """
    if manifest.needs_threshold() and manifest.threshold is None:
        raise ValidationError(
            "manifest contains probability predictions; a threshold is required"
        )

    def score(ref: SubjectRef):
        try:
            return ref.id, _load_subject(ref, manifest.threshold, cfg), None
        except (ValidationError, OSError) as exc:
            return ref.id, None, f"{exc}"

    if jobs > 1 and len(manifest.subjects) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(score, manifest.subjects))
    else:
        results = [score(ref) for ref in manifest.subjects]

    scored: list[tuple[str, SubjectMetrics]] = []
    skipped: list[dict] = []
    for sid, metrics_row, reason in results:
        if progress:
            status = "ok" if reason is None else f"skipped ({reason})"
            print(f"[cohort] {sid}: {status}", file=sys.stderr)
        if reason is None:
            scored.append((sid, metrics_row))
        else:
            skipped.append({"id": sid, "reason": reason})
    scored.sort(key=lambda item: item[0])
    skipped.sort(key=lambda item: item["id"])

    report = CohortReport(
        reference_r=cfg.reference_r,
        threshold=manifest.threshold,
        per_subject=scored,
        summary={"full": _subset_means(scored, [sid for sid, _ in scored])},
        subsets={"full": _ordered_ids(scored)},
        bias=_bias_block(scored),
        load_histogram=_histogram_block(scored, bins),
        skipped=skipped,
    )
    return report


def _ordered_ids(scored: list[tuple[str, SubjectMetrics]]) -> list[str]:
    return [sid for sid, _ in sorted(scored, key=lambda item: (item[1].lesion_load, item[0]))]


def _subset_means(scored: list[tuple[str, SubjectMetrics]],
                  ids: Sequence[str]) -> dict:
    wanted = set(ids)
    rows = [m for sid, m in scored if sid in wanted]
    if not rows:
        return {"mean_dsc": None, "mean_ndsc": None}
    return {
        "mean_dsc": float(np.mean([m.dsc for m in rows])),
        "mean_ndsc": float(np.mean([m.ndsc for m in rows])),
    }


def _bias_block(scored: list[tuple[str, SubjectMetrics]]) -> dict:
    loads = [m.lesion_load for _, m in scored]
    block = {}
    for name, values in (("dsc", [m.dsc for _, m in scored]),
                         ("ndsc", [m.ndsc for _, m in scored])):
        try:
            slope, intercept = rank_regression(loads, values)
            block[name] = {
                "rho": spearman(loads, values),
                "tau": kendall_tau(loads, values),
                "slope": slope,
                "intercept": intercept,
                "n": len(values),
                "error": None,
            }
        except ValidationError as exc:
            block[name] = {"rho": None, "tau": None, "slope": None,
                           "intercept": None, "n": len(values), "error": str(exc)}
    return block


def _histogram_block(scored: list[tuple[str, SubjectMetrics]],
                     bins: int) -> Optional[dict]:
    loads = [m.lesion_load for _, m in scored]
    if not loads:
        return None
    edges, counts = load_histogram(loads, bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def split_by_load(report: CohortReport) -> CohortReport:
    """Partition subjects into low/high lesion-load halves.

    The low half takes ceil(n/2) subjects (a 59-subject cohort splits
    30/29); ties on load are broken by id order and flagged on stderr.
    """
    n = len(report.per_subject)
    if n < 2:
        raise ValidationError("load split needs at least 2 scored subjects")

    ordered = sorted(report.per_subject, key=lambda item: (item[1].lesion_load, item[0]))
    cut = ceil(n / 2)
    if cut < n and ordered[cut - 1][1].lesion_load == ordered[cut][1].lesion_load:
        warnings.warn(
            "lesion-load tie across the low/high split boundary; "
            "membership decided by subject id order",
            stacklevel=2,
        )
    low = [sid for sid, _ in ordered[:cut]]
    high = [sid for sid, _ in ordered[cut:]]

    subsets = dict(report.subsets)
    subsets["low_load"] = low
    subsets["high_load"] = high
    summary = dict(report.summary)
    summary["low_load"] = _subset_means(report.per_subject, low)
    summary["high_load"] = _subset_means(report.per_subject, high)
    return replace_report(report, subsets=subsets, summary=summary)


def replace_report(report: CohortReport, **changes) -> CohortReport:
    data = {**report.__dict__, **changes}
    return CohortReport(**data)


def load_histogram(loads: Sequence[float], bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram over [min, max]; the rightmost bin is closed."""
    arr = np.asarray(loads, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("cannot histogram an empty load list")
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValidationError("loads must lie in [0, 1]")
    lo, hi = float(arr.min()), float(arr.max())
    if lo == hi:
        # degenerate range: numpy's convention, a half-unit pad on each side
        counts, edges = np.histogram(arr, bins=bins)
    else:
        counts, edges = np.histogram(arr, bins=bins, range=(lo, hi))
    return edges, counts


# --- renderings ------------------------------------------------------------

REPORT_KEY_ORDER = ("reference_r", "threshold", "per_subject", "summary",
                    "subsets", "bias", "load_histogram", "skipped")

SUBJECT_CSV_COLUMNS = ("id", "lesion_load", "h", "kappa", "dsc", "ndsc",
                       "precision", "recall")


def subject_metrics_dict(m: SubjectMetrics) -> dict:
    return {
        "lesion_load": m.lesion_load,
        "h": m.h,
        "kappa": m.kappa,
        "dsc": m.dsc,
        "ndsc": m.ndsc,
        "precision": m.precision,
        "recall": m.recall,
        "p_ratio": m.p_ratio,
        "n_ratio": m.n_ratio,
    }


def report_to_dict(report: CohortReport) -> dict:
    """Plain mapping with the stable key layout the JSON rendering uses."""
    return {
        "reference_r": report.reference_r,
        "threshold": report.threshold,
        "per_subject": [
            {"id": sid, **subject_metrics_dict(m)} for sid, m in report.per_subject
        ],
        "summary": report.summary,
        "subsets": report.subsets,
        "bias": report.bias,
        "load_histogram": report.load_histogram,
        "skipped": report.skipped,
    }


def report_to_json(report: CohortReport) -> str:
    """Byte-stable JSON: fixed key order, lossless float repr, 2-space indent."""
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_to_csv(report: CohortReport) -> str:
    """Flat per-subject table for external plotting."""
    lines = [",".join(SUBJECT_CSV_COLUMNS)]
    for sid, m in report.per_subject:
        lines.append(",".join([sid] + [repr(v) for v in (
            m.lesion_load, m.h, m.kappa, m.dsc, m.ndsc, m.precision, m.recall)]))
    return "\n".join(lines) + "\n"
