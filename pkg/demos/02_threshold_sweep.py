"""Thresholding a probability map: PR curves and the recall-1 anchor.

At threshold 0 every voxel is predicted positive, so recall is 1 and the
precision equals the subject's lesion load. That anchor point is exactly
what the normalisation pins to the reference value r.
"""

import numpy as np

from segscore import (
    BinaryMask,
    MetricConfig,
    ProbabilityMap,
    class_ratio,
    kappa,
    lesion_load,
    metric_sweep,
    pr_curve,
)

rng = np.random.default_rng(7)
dims = (16, 16, 16)

# ground truth: a loose blob; probability map: informative but overlapping,
# so the best threshold is a real trade-off
gt_bits = rng.random(dims) < 0.03
gt = BinaryMask(gt_bits)
probs = np.where(gt_bits, rng.beta(5, 2, dims), rng.beta(1, 12, dims))
pm = ProbabilityMap(probs)

thresholds = [0.0, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9]
curve = pr_curve(gt, pm, thresholds)

print("threshold  precision  recall")
for t, p, r in curve.points():
    print(f"{t:<10.2f} {p:<10.4f} {r:<10.4f}")

print()
print(f"lesion load of this subject: {lesion_load(gt):.4f}")
print(f"precision at threshold 0:    {curve.precisions[-1]:.4f}  (equal, by construction)")

r_ref = 0.01
k = kappa(class_ratio(gt), r_ref)
p_at_zero = (1 - lesion_load(gt)) / lesion_load(gt)  # FP/TP when everything is positive
print(f"with r = {r_ref}: 1 / (1 + kappa * p) = {1 / (1 + k * p_at_zero):.6f}")

print()
print("metric sweep (what a validation split would optimise):")
print("threshold  dsc      ndsc")
for t, d, nd in metric_sweep(gt, pm, thresholds, MetricConfig(reference_r=r_ref)):
    print(f"{t:<10.2f} {d:<8.4f} {nd:<8.4f}")
