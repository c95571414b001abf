"""Synthetic ground-truth/prediction cohorts with a closed-form score oracle.

The noise model flips a fraction ``fp_rate`` of negative voxels and
``fn_rate`` of positive voxels. In deterministic mode the flip counts are
exact (``round(rate * pool)``), which turns the usual statistical bias
argument into an equality: with fixed rates,

    dsc  = 2 / (2 + p + n)         depends on load through p = fp_rate / ((1-fn_rate) * h)
    ndsc = 2 / (2 + (1/r - 1) * fp_rate / (1 - fn_rate) + fn_rate / (1 - fn_rate))

so the DSC column of a fixed-noise cohort rises with lesion load while the
nDSC column is constant up to voxel-count rounding.

All randomness comes from numpy's PCG64 generator; every subject draws from
its own stream derived from (seed, subject index), so generation order and
parallelism cannot change outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .volume import BinaryMask

GENERATOR_NAME = "numpy-pcg64"

MODE_DETERMINISTIC = "deterministic"
MODE_STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class NoiseModel:
    """Voxel-flip noise. Rates are fractions of the respective class pools."""

    fp_rate: float
    fn_rate: float
    mode: str = MODE_DETERMINISTIC
    seed: int = 0

    def __post_init__(self):
        for name, rate in (("fp_rate", self.fp_rate), ("fn_rate", self.fn_rate)):
            if not 0.0 <= rate < 1.0:
                raise ValidationError(f"{name} must lie in [0, 1), got {rate}")
        if self.mode not in (MODE_DETERMINISTIC, MODE_STOCHASTIC):
            raise ValidationError(f"unknown noise mode {self.mode!r}")


@dataclass(frozen=True)
class SubjectSpec:
    """Recipe for one synthetic ground truth."""

    dims: tuple[int, int, int]
    target_load: float
    blob_count: int = 3
    seed: int = 0

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValidationError(f"dims must be 3 positive integers, got {self.dims}")
        if not 0.0 < self.target_load < 1.0:
            raise ValidationError(f"target_load must lie in (0, 1), got {self.target_load}")
        if self.blob_count < 1:
            raise ValidationError("blob_count must be positive")

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def positive_count(self) -> int:
        """Exact positive voxel count the generated mask will have."""
        return round(self.target_load * self.voxel_count)


def generate_gt(spec: SubjectSpec) -> BinaryMask:
    """Ellipsoidal-blob mask with exactly ``spec.positive_count`` positives.

    Blobs give the mask shape; the exact count is hit by taking the target
    number of voxels closest (in blob-normalised distance) to the blob
    centres, ties broken by flat voxel index. Deterministic given the seed.
    """
    target = spec.positive_count
    volume = spec.voxel_count
    if target < 1:
        raise ValidationError(
            f"unachievable load: round({spec.target_load} * {volume}) < 1 voxel"
        )
    if target >= volume:
        raise ValidationError(
            f"unachievable load: {target} positives leave no negative voxels"
        )

    rng = np.random.default_rng(spec.seed)
    nx, ny, nz = spec.dims
    per_blob = target / spec.blob_count
    # radius of a sphere holding per_blob voxels, then squashed per axis
    base_radius = max(1.0, (3.0 * per_blob / (4.0 * math.pi)) ** (1.0 / 3.0))

    centers = rng.uniform(low=0.0, high=[nx, ny, nz], size=(spec.blob_count, 3))
    squash = rng.uniform(0.5, 2.0, size=(spec.blob_count, 3))
    radii = np.maximum(base_radius * squash, 0.5)

    gx, gy, gz = np.meshgrid(
        np.arange(nx, dtype=np.float64) + 0.5,
        np.arange(ny, dtype=np.float64) + 0.5,
        np.arange(nz, dtype=np.float64) + 0.5,
        indexing="ij",
    )
    dist = np.full((nx, ny, nz), np.inf)
    for c, r in zip(centers, radii):
        d = np.sqrt(((gx - c[0]) / r[0]) ** 2
                    + ((gy - c[1]) / r[1]) ** 2
                    + ((gz - c[2]) / r[2]) ** 2)
        np.minimum(dist, d, out=dist)

    flat = dist.ravel()
    order = np.lexsort((np.arange(flat.size), flat))
    bits = np.zeros(flat.size, dtype=bool)
    bits[order[:target]] = True
    return BinaryMask(bits.reshape(spec.dims))


def corrupt(gt: BinaryMask, nm: NoiseModel) -> BinaryMask:
    """Flip voxels of a ground truth according to the noise model.

    Deterministic mode flips exactly round(fp_rate * negatives) negatives and
    round(fn_rate * positives) positives, chosen by seeded shuffle; round is
    Python's (half to even). Stochastic mode flips voxels independently.
    """
    pos_count = gt.positive_count()
    if pos_count == 0:
        raise ValidationError("cannot corrupt an empty ground truth")

    bits = gt.bits.ravel()
    neg_count = bits.size - pos_count
    rng = np.random.default_rng(nm.seed)
    out = bits.copy()

    if nm.mode == MODE_DETERMINISTIC:
        n_fp = round(nm.fp_rate * neg_count)
        n_fn = round(nm.fn_rate * pos_count)
        if n_fn >= pos_count:
            raise ValidationError("noise would flip every positive voxel")
        neg_idx = np.flatnonzero(~bits)
        pos_idx = np.flatnonzero(bits)
        out[rng.permutation(neg_idx)[:n_fp]] = True
        out[rng.permutation(pos_idx)[:n_fn]] = False
    else:
        u = rng.random(bits.size)
        flip = np.where(bits, u < nm.fn_rate, u < nm.fp_rate)
        out = np.where(flip, ~bits, bits)
        if not np.any(out & bits):
            raise ValidationError("noise flipped every positive voxel")

    return BinaryMask(out.reshape(gt.dims))


def closed_form_scores(load: float, fp_rate: float, fn_rate: float,
                       r: float) -> tuple[float, float]:
    """Expected (dsc, ndsc) for a subject under exact-count noise.

    With h = load / (1 - load): n = fn_rate / (1 - fn_rate) and
    p = fp_rate / ((1 - fn_rate) * h). The ndsc value is independent of load.
    """
    if not 0.0 < load < 1.0:
        raise ValidationError(f"load must lie in (0, 1), got {load}")
    if not 0.0 <= fp_rate < 1.0 or not 0.0 <= fn_rate < 1.0:
        raise ValidationError("noise rates must lie in [0, 1)")
    if not 0.0 < r < 1.0:
        raise ValidationError(f"reference value r must lie in (0, 1), got {r}")
    h = load / (1.0 - load)
    n = fn_rate / (1.0 - fn_rate)
    p = fp_rate / (1.0 - fn_rate) / h
    dsc_value = 2.0 / (2.0 + p + n)
    ndsc_value = 2.0 / (2.0 + (1.0 / r - 1.0) * fp_rate / (1.0 - fn_rate) + n)
    return dsc_value, ndsc_value


def subject_noise_model(nm: NoiseModel, cohort_seed: int, index: int) -> NoiseModel:
    """Noise model with a per-subject stream derived from (seed, index)."""
    derived = np.random.SeedSequence([cohort_seed, index, 0xC0]).generate_state(1)[0]
    return replace(nm, seed=int(derived))


def generate_cohort(n: int, load_range: tuple[float, float], nm: NoiseModel,
                    dims: tuple[int, int, int], seed: int,
                    blob_count: int = 3) -> list[tuple[BinaryMask, BinaryMask, SubjectSpec]]:
    """n (gt, pred, spec) triples with log-spaced lesion loads.

    Deterministic noise mode uses an exact log grid of loads; stochastic mode
    samples loads log-uniformly. Each subject's generation and noise streams
    derive from (seed, index), so outputs do not depend on evaluation order.
    """
    lo, hi = load_range
    if n < 2:
        raise ValidationError("cohort needs at least 2 subjects")
    if not 0.0 < lo < hi < 1.0:
        raise ValidationError(f"degenerate load range ({lo}, {hi})")

    if nm.mode == MODE_DETERMINISTIC:
        loads = np.geomspace(lo, hi, n)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA0]))
        loads = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
        loads.sort()

    out = []
    for i, load in enumerate(loads):
        gt_seed = int(np.random.SeedSequence([int(seed), i, 0x61]).generate_state(1)[0])
        spec = SubjectSpec(dims=tuple(dims), target_load=float(load),
                           blob_count=blob_count, seed=gt_seed)
        gt = generate_gt(spec)
        pred = corrupt(gt, subject_noise_model(nm, int(seed), i))
        out.append((gt, pred, spec))
    return out
