"""Manifest ingestion, cohort evaluation, stratification, and report output."""

import csv
import json

import numpy as np
import pytest

from segscore import (
    BinaryMask,
    CohortManifest,
    MetricConfig,
    SubjectRef,
    ValidationError,
    estimate_reference,
    evaluate_cohort,
    load_histogram,
    read_manifest,
    report_to_csv,
    report_to_dict,
    report_to_json,
    split_by_load,
    volume_from_array,
    write_nifti_file,
)
from segscore.cohort import CohortReport
from segscore.metrics import SubjectMetrics
from conftest import mask

FIG2_R = 2 / 25


def write_mask_file(path, flat, dims):
    arr = np.asarray(flat, dtype=np.uint8).reshape(dims)
    write_nifti_file(volume_from_array(arr, "uint8"), path)


def write_prob_file(path, flat, dims):
    arr = np.asarray(flat, dtype=np.float64).reshape(dims)
    write_nifti_file(volume_from_array(arr, "float64"), path)


def write_manifest_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "gt_path", "pred_path", "pred_kind"])
        writer.writerows(rows)


@pytest.fixture
def worked_cohort(tmp_path):
    """Two 25-voxel subjects reproducing the worked metric examples."""
    dims = (5, 5, 1)
    write_mask_file(tmp_path / "low_gt.nii", [1, 1] + [0] * 23, dims)
    write_mask_file(tmp_path / "low_pred.nii",
                    [1, 0, 1, 1, 1, 1] + [0] * 19, dims)      # tp=1 fp=4 fn=1
    write_mask_file(tmp_path / "high_gt.nii", [1] * 6 + [0] * 19, dims)
    write_mask_file(tmp_path / "high_pred.nii",
                    [1, 1, 0, 0, 0, 0, 1, 1, 1, 1] + [0] * 15, dims)  # tp=2 fp=4 fn=4
    manifest_path = tmp_path / "manifest.csv"
    write_manifest_csv(manifest_path, [
        ["low", "low_gt.nii", "low_pred.nii", "binary"],
        ["high", "high_gt.nii", "high_pred.nii", "binary"],
    ])
    return manifest_path


class TestManifest:
    def test_relative_paths_resolve_against_manifest_dir(self, worked_cohort):
        manifest = read_manifest(worked_cohort)
        assert all(s.gt_path.is_file() for s in manifest.subjects)

    def test_header_is_enforced(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,gt,pred,kind\nx,a,b,binary\n")
        with pytest.raises(ValidationError, match="header"):
            read_manifest(p)

    def test_duplicate_ids_rejected(self, tmp_path):
        p = tmp_path / "dup.csv"
        write_manifest_csv(p, [["a", "g.nii", "p.nii", "binary"],
                               ["a", "g2.nii", "p2.nii", "binary"]])
        with pytest.raises(ValidationError, match="duplicate"):
            read_manifest(p)

    def test_unknown_pred_kind_rejected(self, tmp_path):
        p = tmp_path / "kind.csv"
        write_manifest_csv(p, [["a", "g.nii", "p.nii", "fuzzy"]])
        with pytest.raises(ValidationError, match="pred_kind"):
            read_manifest(p)


class TestEstimateReference:
    def test_mean_of_loads(self):
        low = mask([1, 1] + [0] * 23, dims=(5, 5, 1))
        high = mask([1] * 6 + [0] * 19, dims=(5, 5, 1))
        assert estimate_reference([low, high]) == pytest.approx(4 / 25, abs=1e-15)

    def test_single_mask(self):
        m = mask([1, 0, 0, 0])
        assert estimate_reference([m]) == 0.25

    def test_all_empty_warns(self):
        empty = mask([0, 0, 0, 0])
        with pytest.warns(UserWarning, match=r"\(0, 1\)"):
            assert estimate_reference([empty, empty]) == 0.0

    def test_empty_list_rejected(self):
        with pytest.raises(ValidationError):
            estimate_reference([])


class TestEvaluateCohort:
    def test_worked_two_subject_values(self, worked_cohort):
        manifest = read_manifest(worked_cohort)
        report = evaluate_cohort(manifest, MetricConfig(reference_r=FIG2_R))
        by_id = dict(report.per_subject)
        low, high = by_id["low"], by_id["high"]
        assert low.kappa == 1.0
        assert low.ndsc == low.dsc == pytest.approx(2 / 7, abs=1e-15)
        assert high.dsc == pytest.approx(1 / 3, abs=1e-12)
        assert high.ndsc == pytest.approx(0.17757009345794392, abs=1e-12)
        # the re-ranking: dsc prefers the high-load subject, ndsc the low-load one
        assert high.dsc > low.dsc
        assert high.ndsc < low.ndsc

    def test_summary_means_match_per_subject(self, worked_cohort):
        report = evaluate_cohort(read_manifest(worked_cohort),
                                 MetricConfig(reference_r=FIG2_R))
        rows = [m for _, m in report.per_subject]
        assert report.summary["full"]["mean_dsc"] == pytest.approx(
            float(np.mean([m.dsc for m in rows])), abs=1e-12)
        assert report.summary["full"]["mean_ndsc"] == pytest.approx(
            float(np.mean([m.ndsc for m in rows])), abs=1e-12)

    def test_constant_metric_is_flagged_not_crashed(self, tmp_path):
        dims = (4, 4, 1)
        rows = []
        for i, load_voxels in enumerate((1, 2, 3)):
            flat = [1] * load_voxels + [0] * (16 - load_voxels)
            write_mask_file(tmp_path / f"g{i}.nii", flat, dims)
            rows.append([f"s{i}", f"g{i}.nii", f"g{i}.nii", "binary"])
        manifest_path = tmp_path / "m.csv"
        write_manifest_csv(manifest_path, rows)
        report = evaluate_cohort(read_manifest(manifest_path))
        assert report.summary["full"]["mean_dsc"] == 1.0
        assert report.bias["dsc"]["error"] is not None
        assert report.bias["dsc"]["rho"] is None

    def test_skipped_subjects_are_reported(self, tmp_path):
        dims = (4, 1, 1)
        write_mask_file(tmp_path / "good_gt.nii", [1, 0, 0, 0], dims)
        write_mask_file(tmp_path / "good_pred.nii", [1, 0, 0, 0], dims)
        write_mask_file(tmp_path / "empty_gt.nii", [0, 0, 0, 0], dims)
        write_mask_file(tmp_path / "some_pred.nii", [1, 0, 0, 0], dims)
        manifest_path = tmp_path / "m.csv"
        write_manifest_csv(manifest_path, [
            ["good", "good_gt.nii", "good_pred.nii", "binary"],
            ["empty_gt", "empty_gt.nii", "some_pred.nii", "binary"],
            ["both_empty", "empty_gt.nii", "empty_gt.nii", "binary"],
            ["missing", "nope.nii", "good_pred.nii", "binary"],
        ])
        report = evaluate_cohort(read_manifest(manifest_path))
        assert [sid for sid, _ in report.per_subject] == ["good"]
        reasons = {e["id"]: e["reason"] for e in report.skipped}
        # lesion-free scans never enter the correlations, whatever the pred
        assert "empty ground truth" in reasons["empty_gt"]
        assert "empty ground truth" in reasons["both_empty"]
        assert "missing" in reasons

    def test_probability_predictions_need_threshold(self, tmp_path):
        dims = (4, 1, 1)
        write_mask_file(tmp_path / "gt.nii", [1, 1, 0, 0], dims)
        write_prob_file(tmp_path / "pm.nii", [0.9, 0.4, 0.6, 0.1], dims)
        manifest_path = tmp_path / "m.csv"
        write_manifest_csv(manifest_path, [["s", "gt.nii", "pm.nii", "probability"]])
        manifest = read_manifest(manifest_path)
        with pytest.raises(ValidationError, match="threshold"):
            evaluate_cohort(manifest)
        report = evaluate_cohort(
            CohortManifest(subjects=manifest.subjects, threshold=0.5),
            MetricConfig(reference_r=0.5))
        assert dict(report.per_subject)["s"].dsc == 0.5

    def test_order_independence(self, tmp_path):
        dims = (6, 6, 1)
        rng = np.random.default_rng(17)
        rows = []
        for i in range(6):
            gt = (rng.random(36) < 0.3).astype(int)
            if gt.sum() == 0:
                gt[0] = 1
            pred = gt ^ (rng.random(36) < 0.1)
            write_mask_file(tmp_path / f"g{i}.nii", gt, dims)
            write_mask_file(tmp_path / f"p{i}.nii", pred, dims)
            rows.append([f"s{i}", f"g{i}.nii", f"p{i}.nii", "binary"])
        fwd, rev = tmp_path / "fwd.csv", tmp_path / "rev.csv"
        write_manifest_csv(fwd, rows)
        write_manifest_csv(rev, rows[::-1])
        report_fwd = evaluate_cohort(read_manifest(fwd))
        report_rev = evaluate_cohort(read_manifest(rev))
        assert report_to_json(split_by_load(report_fwd)) == \
            report_to_json(split_by_load(report_rev))

    def test_jobs_do_not_change_results(self, worked_cohort):
        manifest = read_manifest(worked_cohort)
        cfg = MetricConfig(reference_r=FIG2_R)
        assert report_to_json(evaluate_cohort(manifest, cfg, jobs=1)) == \
            report_to_json(evaluate_cohort(manifest, cfg, jobs=4))


def fabricated_report(loads, dscs=None, ids=None):
    n = len(loads)
    ids = ids or [f"s{i:03d}" for i in range(n)]
    dscs = dscs or [0.5] * n
    per_subject = [
        (ids[i],
         SubjectMetrics(lesion_load=loads[i], h=loads[i] / (1 - loads[i]),
                        kappa=1.0, dsc=dscs[i], ndsc=dscs[i],
                        precision=dscs[i], recall=dscs[i],
                        p_ratio=1.0, n_ratio=1.0))
        for i in range(n)
    ]
    per_subject.sort(key=lambda item: item[0])
    return CohortReport(
        reference_r=0.001, threshold=None, per_subject=per_subject,
        summary={"full": {"mean_dsc": float(np.mean(dscs)),
                          "mean_ndsc": float(np.mean(dscs))}},
        subsets={"full": [sid for sid, _ in per_subject]},
        bias={}, load_histogram=None, skipped=[],
    )


class TestSplitByLoad:
    def test_59_subjects_split_30_29(self):
        rng = np.random.default_rng(1)
        loads = sorted(rng.uniform(0.0001, 0.3, size=59))
        report = split_by_load(fabricated_report(loads))
        assert len(report.subsets["low_load"]) == 30
        assert len(report.subsets["high_load"]) == 29
        assert set(report.subsets["low_load"]) | set(report.subsets["high_load"]) \
            == set(report.subsets["full"])
        assert not set(report.subsets["low_load"]) & set(report.subsets["high_load"])

    def test_four_subjects(self):
        report = split_by_load(fabricated_report([0.01, 0.02, 0.03, 0.04]))
        assert report.subsets["low_load"] == ["s000", "s001"]
        assert report.subsets["high_load"] == ["s002", "s003"]

    def test_tie_broken_by_id_and_flagged(self):
        with pytest.warns(UserWarning, match="tie"):
            report = split_by_load(fabricated_report([0.05, 0.05], ids=["b", "a"]))
        assert report.subsets["low_load"] == ["a"]
        assert report.subsets["high_load"] == ["b"]

    def test_subset_means(self):
        report = split_by_load(
            fabricated_report([0.01, 0.02, 0.03, 0.04], dscs=[0.1, 0.2, 0.3, 0.4]))
        assert report.summary["low_load"]["mean_dsc"] == pytest.approx(0.15)
        assert report.summary["high_load"]["mean_dsc"] == pytest.approx(0.35)

    def test_needs_two_subjects(self):
        with pytest.raises(ValidationError):
            split_by_load(fabricated_report([0.1]))


class TestLoadHistogram:
    def test_single_bin(self):
        edges, counts = load_histogram([0.1, 0.2, 0.3], 1)
        assert list(counts) == [3]
        np.testing.assert_allclose(edges, [0.1, 0.3])

    def test_endpoints_two_bins(self):
        _, counts = load_histogram([0.0, 1.0], 2)
        assert list(counts) == [1, 1]

    def test_rightmost_bin_closed(self):
        edges, counts = load_histogram([0.1, 0.15, 0.9], 2)
        assert list(counts) == [2, 1]
        np.testing.assert_allclose(edges, [0.1, 0.5, 0.9])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            load_histogram([], 3)


class TestReportRendering:
    def test_json_key_order_and_stability(self, worked_cohort):
        manifest = read_manifest(worked_cohort)
        cfg = MetricConfig(reference_r=FIG2_R)
        a = report_to_json(split_by_load(evaluate_cohort(manifest, cfg)))
        b = report_to_json(split_by_load(evaluate_cohort(manifest, cfg)))
        assert a == b
        parsed = json.loads(a)
        assert list(parsed.keys()) == [
            "reference_r", "threshold", "per_subject", "summary", "subsets",
            "bias", "load_histogram", "skipped"]

    def test_csv_columns(self, worked_cohort):
        report = evaluate_cohort(read_manifest(worked_cohort),
                                 MetricConfig(reference_r=FIG2_R))
        lines = report_to_csv(report).strip().splitlines()
        assert lines[0] == "id,lesion_load,h,kappa,dsc,ndsc,precision,recall"
        assert len(lines) == 3
        assert lines[1].startswith("high,")

    def test_json_numbers_round_trip_losslessly(self, worked_cohort):
        report = evaluate_cohort(read_manifest(worked_cohort),
                                 MetricConfig(reference_r=FIG2_R))
        parsed = json.loads(report_to_json(report))
        low = [row for row in parsed["per_subject"] if row["id"] == "low"][0]
        assert low["ndsc"] == dict(report.per_subject)["low"].ndsc


class TestCrossModuleConsistency:
    def test_rank_regression_slope_equals_spearman_for_tie_free_metric(self, tmp_path):
        from segscore import rank_regression, spearman
        rng = np.random.default_rng(23)
        dims = (8, 8, 2)
        rows = []
        for i in range(7):
            n_pos = 2 + 3 * i
            gt = np.zeros(128, dtype=int)
            gt[:n_pos] = 1
            pred = gt.copy()
            flip = rng.integers(0, 128, size=2 + i)
            pred[flip] ^= 1
            if (pred & gt).sum() == 0:
                pred = gt.copy()
            write_mask_file(tmp_path / f"g{i}.nii", gt, dims)
            write_mask_file(tmp_path / f"p{i}.nii", pred, dims)
            rows.append([f"s{i}", f"g{i}.nii", f"p{i}.nii", "binary"])
        manifest_path = tmp_path / "m.csv"
        write_manifest_csv(manifest_path, rows)
        report = evaluate_cohort(read_manifest(manifest_path))
        loads = [m.lesion_load for _, m in report.per_subject]
        dscs = [m.dsc for _, m in report.per_subject]
        if len(set(loads)) == len(loads) and len(set(dscs)) == len(dscs):
            assert report.bias["dsc"]["slope"] == pytest.approx(
                spearman(loads, dscs), abs=1e-12)
            assert report.bias["dsc"]["slope"] == pytest.approx(
                rank_regression(loads, dscs)[0], abs=1e-15)


def test_report_dict_matches_json(worked_cohort):
    report = evaluate_cohort(read_manifest(worked_cohort),
                             MetricConfig(reference_r=FIG2_R))
    assert json.loads(report_to_json(report)) == report_to_dict(report)
