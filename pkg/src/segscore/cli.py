"""Command-line interface.

Subcommands cover the full pipeline: ``evaluate`` scores one prediction
against one ground truth, ``cohort`` produces the bias report for a
manifest, ``estimate-ref`` computes the mean lesion load of a split,
``sweep`` tabulates mean DSC/nDSC over a threshold grid, ``synth``
writes a synthetic cohort to disk, and ``call`` is a JSON-over-stdin
endpoint for foreign-language wrappers.

Exit codes: 0 success, 1 I/O error, 2 validation error. JSON output is
byte-stable for identical inputs (fixed key order and float formatting).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, cohort, metrics, nifti, rankstats, synth
from .errors import ValidationError
from .volume import BinaryMask, as_binary_mask, as_probability_map

DEFAULT_THRESHOLD = 0.35


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segscore",
        description="DSC/nDSC scoring and lesion-load bias reports for 3D binary masks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--quiet", action="store_true",
                       help="suppress per-subject progress lines on stderr")
        p.add_argument("--output", type=Path, default=None,
                       help="write the rendering to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv", "text"), default="json")

    p = sub.add_parser("evaluate", help="score one prediction against one ground truth")
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--prob", action="store_true",
                   help="the prediction is a probability map to binarize")
    p.add_argument("--threshold", type=float, default=None,
                   help=f"binarization threshold (default {DEFAULT_THRESHOLD} with --prob)")
    p.add_argument("--ref", type=float, default=metrics.DEFAULT_REFERENCE_R,
                   help="reference value r in (0, 1)")
    p.add_argument("--roi", type=Path, default=None,
                   help="restrict counting to this region-of-interest mask")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cohort", help="evaluate a manifest and emit the bias report")
    p.add_argument("--manifest", type=Path, required=True)
    ref = p.add_mutually_exclusive_group()
    ref.add_argument("--ref", type=float, default=None,
                     help="reference value r in (0, 1)")
    ref.add_argument("--ref-manifest", type=Path, default=None,
                     help="estimate r from the ground truths of this separate manifest")
    ref.add_argument("--ref-self", action="store_true",
                     help="estimate r from the evaluation cohort itself (biased; warns)")
    p.add_argument("--threshold", type=float, default=None,
                   help="binarization threshold for probability predictions")
    p.add_argument("--bins", type=int, default=10, help="load histogram bin count")
    p.add_argument("--strict", action="store_true",
                   help="exit 2 if any subject was skipped")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel per-subject evaluation workers")
    add_common(p)
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("estimate-ref",
                       help="mean lesion load of a manifest's ground truths")
    p.add_argument("--manifest", type=Path, required=True)
    add_common(p)
    p.set_defaults(func=cmd_estimate_ref)

    p = sub.add_parser("sweep",
                       help="mean DSC/nDSC over a threshold grid, with the argmax")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--thresholds", required=True, metavar="LO:HI:STEP")
    p.add_argument("--ref", type=float, default=metrics.DEFAULT_REFERENCE_R)
    p.add_argument("--optimize", choices=("dsc", "ndsc"), required=True)
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic cohort on disk")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--dims", required=True, metavar="X,Y,Z")
    p.add_argument("--loads", required=True, metavar="LO:HI",
                   help="lesion-load range, spanned log-uniformly")
    p.add_argument("--fp", type=float, required=True, help="false-positive rate")
    p.add_argument("--fn", type=float, required=True, help="false-negative rate")
    p.add_argument("--mode", choices=("det", "stoch"), default="det")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blobs", type=int, default=3, help="lesion blobs per subject")
    p.add_argument("--out", type=Path, required=True)
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("call",
                       help="invoke one library function with a JSON payload on stdin "
                            "(programmatic endpoint used by language bindings)")
    p.add_argument("op", choices=sorted(_CALL_OPS))
    add_common(p)
    p.set_defaults(func=cmd_call)

    return parser


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.output is not None:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _read_mask(path: Path) -> BinaryMask:
    return as_binary_mask(nifti.read_nifti_file(path))


# --- evaluate ----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    if args.threshold is not None and not args.prob:
        raise ValidationError("--threshold requires --prob")
    threshold = args.threshold
    if args.prob and threshold is None:
        threshold = DEFAULT_THRESHOLD

    cfg = metrics.MetricConfig(reference_r=args.ref)
    gt = _read_mask(args.gt)
    if args.prob:
        pred = metrics.binarize(
            as_probability_map(nifti.read_nifti_file(args.pred)), threshold)
    else:
        pred = _read_mask(args.pred)
    roi = _read_mask(args.roi) if args.roi is not None else None
    m = metrics.evaluate_pair(gt, pred, cfg, roi)

    payload = {**cohort.subject_metrics_dict(m),
               "reference_r": args.ref, "threshold": threshold}
    if args.format == "json":
        _emit(args, _json(payload))
    elif args.format == "csv":
        row = [args.gt.stem] + [repr(payload[k]) for k in
                                ("lesion_load", "h", "kappa", "dsc", "ndsc",
                                 "precision", "recall")]
        _emit(args, ",".join(cohort.SUBJECT_CSV_COLUMNS) + "\n" + ",".join(row))
    else:
        lines = [f"{k:<12} {v}" for k, v in payload.items()]
        _emit(args, "\n".join(lines))
    return 0


# --- cohort -------------------------------------------------------------------

def _resolve_reference(args, manifest: cohort.CohortManifest) -> float:
    if args.ref is not None:
        return args.ref
    if args.ref_manifest is not None:
        ref_manifest = cohort.read_manifest(args.ref_manifest)
        masks = [_read_mask(s.gt_path) for s in ref_manifest.subjects]
        return cohort.estimate_reference(masks)
    if args.ref_self:
        print("warning: estimating the reference value from the evaluation "
              "cohort itself; scores are not comparable across cohorts",
              file=sys.stderr)
        masks = [_read_mask(s.gt_path) for s in manifest.subjects]
        return cohort.estimate_reference(masks)
    return metrics.DEFAULT_REFERENCE_R


def cmd_cohort(args) -> int:
    manifest = cohort.read_manifest(args.manifest)
    if args.threshold is not None:
        manifest = cohort.CohortManifest(subjects=manifest.subjects,
                                         threshold=args.threshold)
    reference_r = _resolve_reference(args, manifest)
    cfg = metrics.MetricConfig(reference_r=reference_r)
    report = cohort.evaluate_cohort(manifest, cfg, bins=args.bins,
                                    jobs=max(1, args.jobs),
                                    progress=not args.quiet)
    if len(report.per_subject) >= 2:
        report = cohort.split_by_load(report)

    if args.format == "json":
        _emit(args, cohort.report_to_json(report))
    elif args.format == "csv":
        _emit(args, cohort.report_to_csv(report))
    else:
        _emit(args, _report_text(report))

    if report.skipped and not args.quiet:
        for entry in report.skipped:
            print(f"warning: skipped {entry['id']}: {entry['reason']}",
                  file=sys.stderr)
    if args.strict and report.skipped:
        return 2
    return 0


def _report_text(report: cohort.CohortReport) -> str:
    lines = [f"reference_r  {report.reference_r}",
             f"threshold    {report.threshold}",
             f"subjects     {len(report.per_subject)} scored, "
             f"{len(report.skipped)} skipped"]
    for name in ("full", "low_load", "high_load"):
        if name in report.summary:
            s = report.summary[name]
            lines.append(f"{name:<10} mean_dsc={s['mean_dsc']} mean_ndsc={s['mean_ndsc']}")
    for name, stats in report.bias.items():
        if stats["error"]:
            lines.append(f"bias[{name}]  error: {stats['error']}")
        else:
            lines.append(f"bias[{name}]  rho={stats['rho']} tau={stats['tau']} "
                         f"slope={stats['slope']}")
    return "\n".join(lines)


# --- estimate-ref --------------------------------------------------------------

def cmd_estimate_ref(args) -> int:
    manifest = cohort.read_manifest(args.manifest)
    masks = [_read_mask(s.gt_path) for s in manifest.subjects]
    r = cohort.estimate_reference(masks)
    if args.format == "json":
        _emit(args, _json({"reference_r": r, "n_subjects": len(masks)}))
    elif args.format == "csv":
        _emit(args, f"reference_r\n{r!r}")
    else:
        _emit(args, f"reference_r  {r}")
    return 0


# --- sweep ----------------------------------------------------------------------

def _parse_grid(spec: str) -> list[float]:
    try:
        lo, hi, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise ValidationError(
            f"bad threshold range {spec!r}; expected LO:HI:STEP") from None
    if step <= 0:
        raise ValidationError(f"step must be positive, got {step}")
    if not (0.0 <= lo < hi <= 1.0):
        raise ValidationError(f"need 0 <= lo < hi <= 1, got {lo}:{hi}")
    ts = []
    k = 0
    while True:
        t = round(lo + k * step, 12)
        if t > hi + 1e-12:
            break
        ts.append(min(t, 1.0))
        k += 1
    return ts


def cmd_sweep(args) -> int:
    manifest = cohort.read_manifest(args.manifest)
    grid = _parse_grid(args.thresholds)
    cfg = metrics.MetricConfig(reference_r=args.ref)

    pairs = []
    for ref in manifest.subjects:
        if ref.pred_kind != cohort.PRED_PROBABILITY:
            raise ValidationError(
                f"subject {ref.id!r}: sweep needs probability predictions, "
                f"got pred_kind={ref.pred_kind!r}"
            )
        gt = _read_mask(ref.gt_path)
        if gt.positive_count() == 0:
            raise ValidationError(
                f"subject {ref.id!r}: sweep undefined for empty ground truth")
        pm = as_probability_map(nifti.read_nifti_file(ref.pred_path))
        pairs.append((ref.id, gt, pm))
        if not args.quiet:
            print(f"[sweep] loaded {ref.id}", file=sys.stderr)
    if not pairs:
        raise ValidationError("manifest lists no subjects")

    rows = []
    for t in grid:
        per_subject = [metrics.evaluate_pair(gt, metrics.binarize(pm, t), cfg)
                       for _, gt, pm in pairs]
        rows.append({
            "threshold": t,
            "mean_dsc": float(np.mean([m.dsc for m in per_subject])),
            "mean_ndsc": float(np.mean([m.ndsc for m in per_subject])),
        })

    key = f"mean_{args.optimize}"
    best = rows[0]
    for row in rows[1:]:
        if row[key] > best[key]:
            best = row
    payload = {
        "optimize": args.optimize,
        "best_threshold": best["threshold"],
        "best_score": best[key],
        "rows": rows,
    }
    if args.format == "json":
        _emit(args, _json(payload))
    elif args.format == "csv":
        lines = ["threshold,mean_dsc,mean_ndsc"]
        lines += [f"{r['threshold']!r},{r['mean_dsc']!r},{r['mean_ndsc']!r}"
                  for r in rows]
        _emit(args, "\n".join(lines))
    else:
        lines = [f"{r['threshold']:<8} dsc={r['mean_dsc']:.6f} "
                 f"ndsc={r['mean_ndsc']:.6f}" for r in rows]
        lines.append(f"best {args.optimize} at threshold {best['threshold']}")
        _emit(args, "\n".join(lines))
    return 0


# --- synth ------------------------------------------------------------------------

def cmd_synth(args) -> int:
    try:
        dims = tuple(int(d) for d in args.dims.split(","))
    except ValueError:
        raise ValidationError(f"bad dims {args.dims!r}; expected X,Y,Z") from None
    if len(dims) != 3:
        raise ValidationError(f"bad dims {args.dims!r}; expected X,Y,Z")
    try:
        lo, hi = (float(part) for part in args.loads.split(":"))
    except ValueError:
        raise ValidationError(f"bad load range {args.loads!r}; expected LO:HI") from None

    mode = synth.MODE_DETERMINISTIC if args.mode == "det" else synth.MODE_STOCHASTIC
    nm = synth.NoiseModel(fp_rate=args.fp, fn_rate=args.fn, mode=mode, seed=args.seed)
    triples = synth.generate_cohort(args.subjects, (lo, hi), nm, dims,
                                    seed=args.seed, blob_count=args.blobs)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(args.subjects - 1)))
    refs = []
    for i, (gt, pred, spec) in enumerate(triples):
        sid = f"s{i:0{width}d}"
        gt_path = out / f"{sid}_gt.nii"
        pred_path = out / f"{sid}_pred.nii"
        nifti.write_nifti_file(nifti.volume_from_array(
            gt.bits.astype(np.uint8), "uint8"), gt_path)
        nifti.write_nifti_file(nifti.volume_from_array(
            pred.bits.astype(np.uint8), "uint8"), pred_path)
        refs.append(cohort.SubjectRef(id=sid, gt_path=gt_path, pred_path=pred_path,
                                      pred_kind=cohort.PRED_BINARY))
        if not args.quiet:
            print(f"[synth] {sid}: load={spec.target_load:.6g}", file=sys.stderr)

    manifest_path = out / "manifest.csv"
    cohort.write_manifest(cohort.CohortManifest(subjects=tuple(refs)), manifest_path)
    params = {
        "generator": synth.GENERATOR_NAME,
        "subjects": args.subjects,
        "dims": list(dims),
        "loads": [lo, hi],
        "fp_rate": args.fp,
        "fn_rate": args.fn,
        "mode": mode,
        "seed": args.seed,
        "blob_count": args.blobs,
    }
    (out / "params.json").write_text(_json(params), encoding="utf-8")
    _emit(args, _json({"manifest": str(manifest_path), "subjects": len(refs)}))
    return 0


# --- call (bindings endpoint) -------------------------------------------------------

def _counts_from(payload) -> metrics.ConfusionCounts:
    c = payload["counts"]
    return metrics.ConfusionCounts(tp=int(c["tp"]), fp=int(c["fp"]),
                                   fn=int(c["fn"]), tn=int(c.get("tn", 0)))


def _cfg_from(payload) -> metrics.MetricConfig:
    return metrics.MetricConfig(
        reference_r=float(payload.get("reference_r", metrics.DEFAULT_REFERENCE_R)),
        empty_convention=payload.get("empty_convention", metrics.BOTH_EMPTY_IS_ONE),
    )


def _call_evaluate_pair(payload) -> dict:
    dims = tuple(int(d) for d in payload["dims"])
    if len(dims) != 3:
        raise ValidationError(f"dims must have 3 entries, got {dims}")
    expected = dims[0] * dims[1] * dims[2]
    arrays = {}
    for name in ("gt", "pred"):
        arr = np.asarray(payload[name], dtype=np.float64).ravel()
        if arr.size != expected:
            raise ValidationError(
                f"dimension mismatch: {name} has {arr.size} values but dims "
                f"{dims} need {expected}"
            )
        arrays[name] = arr.reshape(dims)
    gt_arr, pred_arr = arrays["gt"], arrays["pred"]
    gt = as_binary_mask(nifti.volume_from_array(gt_arr))
    threshold = payload.get("threshold")
    if threshold is not None:
        pred = metrics.binarize(
            as_probability_map(nifti.volume_from_array(pred_arr)), float(threshold))
    else:
        pred = as_binary_mask(nifti.volume_from_array(pred_arr))
    m = metrics.evaluate_pair(gt, pred, _cfg_from(payload))
    return cohort.subject_metrics_dict(m)


_CALL_OPS = {
    "kappa": lambda p: {"value": metrics.kappa(float(p["h"]), float(p["r"]))},
    "dsc": lambda p: {"value": metrics.dsc(_counts_from(p), _cfg_from(p))},
    "ndsc": lambda p: {"value": metrics.ndsc(_counts_from(p), float(p["h"]), _cfg_from(p))},
    "precision": lambda p: {"value": metrics.precision(_counts_from(p), _cfg_from(p))},
    "recall": lambda p: {"value": metrics.recall(_counts_from(p), _cfg_from(p))},
    "dsc_from_pr": lambda p: {"value": metrics.dsc_from_pr(float(p["precision"]),
                                                           float(p["recall"]))},
    "ranks": lambda p: {"value": [float(v) for v in rankstats.ranks(p["values"])]},
    "spearman": lambda p: {"value": rankstats.spearman(p["x"], p["y"])},
    "kendall_tau": lambda p: {"value": rankstats.kendall_tau(p["x"], p["y"])},
    "rank_regression": lambda p: {"value": dict(zip(("slope", "intercept"),
                                                    rankstats.rank_regression(p["x"], p["y"])))},
    "evaluate_pair": _call_evaluate_pair,
}


def cmd_call(args) -> int:
    try:
        payload = json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad JSON payload: {exc}") from None
    try:
        result = _CALL_OPS[args.op](payload)
    except KeyError as exc:
        raise ValidationError(f"payload missing field {exc}") from None
    _emit(args, _json(result))
    return 0


# --- entry point ---------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
