"""segscore: DSC/nDSC scoring and lesion-load bias diagnostics for 3D masks."""

__version__ = "0.1.0"

from .errors import FormatError, ValidationError
from .volume import (
    BinaryMask,
    ProbabilityMap,
    Volume,
    VolumeHeader,
    as_binary_mask,
    as_probability_map,
)
from .nifti import (
    read_nifti,
    read_nifti_file,
    volume_from_array,
    write_nifti,
    write_nifti_file,
)
from .metrics import (
    BOTH_EMPTY_IS_ERROR,
    BOTH_EMPTY_IS_ONE,
    ConfusionCounts,
    MetricConfig,
    PrCurve,
    SubjectMetrics,
    binarize,
    class_ratio,
    confusion,
    dsc,
    dsc_from_pr,
    evaluate_pair,
    kappa,
    lesion_load,
    metric_sweep,
    ndsc,
    pr_curve,
    precision,
    recall,
)
from .rankstats import (
    CorrelationResult,
    correlate,
    kendall_tau,
    rank_regression,
    ranks,
    spearman,
)
from .cohort import (
    CohortManifest,
    CohortReport,
    SubjectRef,
    estimate_reference,
    evaluate_cohort,
    load_histogram,
    read_manifest,
    report_to_csv,
    report_to_dict,
    report_to_json,
    split_by_load,
    write_manifest,
)
from .synth import (
    NoiseModel,
    SubjectSpec,
    closed_form_scores,
    corrupt,
    generate_cohort,
    generate_gt,
)

__all__ = [
    "__version__",
    "FormatError",
    "ValidationError",
    "BinaryMask",
    "ProbabilityMap",
    "Volume",
    "VolumeHeader",
    "as_binary_mask",
    "as_probability_map",
    "read_nifti",
    "read_nifti_file",
    "volume_from_array",
    "write_nifti",
    "write_nifti_file",
    "BOTH_EMPTY_IS_ERROR",
    "BOTH_EMPTY_IS_ONE",
    "ConfusionCounts",
    "MetricConfig",
    "PrCurve",
    "SubjectMetrics",
    "binarize",
    "class_ratio",
    "confusion",
    "dsc",
    "dsc_from_pr",
    "evaluate_pair",
    "kappa",
    "lesion_load",
    "metric_sweep",
    "ndsc",
    "pr_curve",
    "precision",
    "recall",
    "CorrelationResult",
    "correlate",
    "kendall_tau",
    "rank_regression",
    "ranks",
    "spearman",
    "CohortManifest",
    "CohortReport",
    "SubjectRef",
    "estimate_reference",
    "evaluate_cohort",
    "load_histogram",
    "read_manifest",
    "report_to_csv",
    "report_to_dict",
    "report_to_json",
    "split_by_load",
    "write_manifest",
    "NoiseModel",
    "SubjectSpec",
    "closed_form_scores",
    "corrupt",
    "generate_cohort",
    "generate_gt",
]
