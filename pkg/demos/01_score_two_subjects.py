"""Why plain Dice rewards lesion load, and how the normalised score fixes it.

Two 25-voxel subjects with the same segmentation *ability* but different
lesion loads: plain DSC ranks the high-load subject above the low-load one,
nDSC ranks them the other way around.
"""

import numpy as np

from segscore import BinaryMask, MetricConfig, evaluate_pair


def subject(gt_flat, pred_flat):
    dims = (5, 5, 1)
    return (BinaryMask(np.array(gt_flat).reshape(dims).astype(bool)),
            BinaryMask(np.array(pred_flat).reshape(dims).astype(bool)))


# low-load subject: 2 lesion voxels out of 25, prediction tp=1 fp=4 fn=1
low_gt, low_pred = subject([1, 1] + [0] * 23,
                           [1, 0, 1, 1, 1, 1] + [0] * 19)

# high-load subject: 6 lesion voxels out of 25, prediction tp=2 fp=4 fn=4
high_gt, high_pred = subject([1] * 6 + [0] * 19,
                             [1, 1, 0, 0, 0, 0, 1, 1, 1, 1] + [0] * 15)

# reference value: a typical lesion load for this (toy) population
cfg = MetricConfig(reference_r=2 / 25)

low = evaluate_pair(low_gt, low_pred, cfg)
high = evaluate_pair(high_gt, high_pred, cfg)

print("subject      load    h       kappa   dsc     ndsc")
for name, m in (("low-load", low), ("high-load", high)):
    print(f"{name:<12} {m.lesion_load:<7.3f} {m.h:<7.4f} {m.kappa:<7.4f} "
          f"{m.dsc:<7.4f} {m.ndsc:<7.4f}")

print()
print(f"DSC says the high-load subject is better:  {high.dsc:.3f} > {low.dsc:.3f}")
print(f"nDSC disagrees:                            {high.ndsc:.3f} < {low.ndsc:.3f}")
print()
print("The low-load subject's kappa is exactly", low.kappa,
      "so for it nDSC == DSC; the high-load subject's false positives get")
print(f"scaled by kappa = {high.kappa:.4f}, removing the head start its "
      "larger lesion load gave it.")
