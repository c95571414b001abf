"""Volume containers and their validated mask / probability-map views.

A :class:`Volume` is a dense 3D scalar grid plus header metadata. Masks and
probability maps are *validated* views: ground truth that is not genuinely
binary is rejected rather than silently thresholded, so corrupt reference
data cannot leak into the metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SUPPORTED_DTYPES = {
    "uint8": np.uint8,
    "int16": np.int16,
    "float32": np.float32,
    "float64": np.float64,
}

# Canonical blank little-endian NIfTI-1 header; real values are stamped on
# write, everything else stays zero.
BLANK_RAW_HEADER = bytes(348)


@dataclass(frozen=True)
class VolumeHeader:
    """Parsed header metadata for one volume file.

    ``raw`` holds the full 348-byte little-endian header so fields this
    library never interprets (orientation, description, ...) survive a
    read/write round trip. It is excluded from equality.
    """

    dims: tuple[int, int, int]
    datatype: str = "float64"
    voxel_spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    scale_slope: float = 1.0
    scale_intercept: float = 0.0
    raw: bytes = field(default=BLANK_RAW_HEADER, compare=False, repr=False)

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValidationError(f"dims must be 3 positive integers, got {self.dims}")
        if self.datatype not in SUPPORTED_DTYPES:
            raise ValidationError(
                f"unsupported datatype {self.datatype!r}; expected one of "
                f"{sorted(SUPPORTED_DTYPES)}"
            )
        if len(self.voxel_spacing) != 3 or any(s <= 0 for s in self.voxel_spacing):
            raise ValidationError(
                f"voxel spacing must be 3 positive reals, got {self.voxel_spacing}"
            )

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


@dataclass(frozen=True, eq=False)
class Volume:
    """A 3D scalar grid. ``data`` has shape ``header.dims``; the first axis is
    the fastest-varying one on disk (Fortran order in the file payload)."""

    header: VolumeHeader
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != self.header.dims:
            raise ValidationError(
                f"data shape {data.shape} does not match header dims {self.header.dims}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("volume contains non-finite values")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Volume):
            return NotImplemented
        return (
            self.header == other.header
            and self.data.dtype == other.data.dtype
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean voxel grid; True marks the positive (lesion) class."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 3:
            raise ValidationError(f"mask must be 3D, got shape {bits.shape}")
        if bits.dtype != bool:
            bits = bits.astype(bool)
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bits.shape

    def positive_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-voxel positive-class probabilities in [0, 1]."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3:
            raise ValidationError(f"probability map must be 3D, got shape {probs.shape}")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ValidationError("probabilities must lie in [0, 1]")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.probs.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProbabilityMap):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)


def as_binary_mask(volume: Volume, tolerance: float = 1e-6) -> BinaryMask:
    """Validate a volume as a binary mask.

    Every voxel must sit within ``tolerance`` of 0 or of 1; anything else is
    rejected with the offending voxel index. This is validation, not
    thresholding: corrupt ground truth should fail loudly.
    """
    data = np.asarray(volume.data, dtype=np.float64)
    near_one = np.abs(data - 1.0) <= tolerance
    near_zero = np.abs(data) <= tolerance
    bad = ~(near_one | near_zero)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(
            f"not a binary mask: value {data[idx]!r} at voxel {idx} is outside "
            f"both tolerance bands (tolerance={tolerance})"
        )
    return BinaryMask(near_one)


def as_probability_map(volume: Volume, clamp_epsilon: float = 1e-6) -> ProbabilityMap:
    """Validate a volume as a probability map, clamping tiny overshoots.

    Values in ``[-clamp_epsilon, 1 + clamp_epsilon]`` are clamped into
    [0, 1]; anything further out is an error.
    """
    data = np.asarray(volume.data, dtype=np.float64)
    if data.size and (data.min() < -clamp_epsilon or data.max() > 1.0 + clamp_epsilon):
        bad = (data < -clamp_epsilon) | (data > 1.0 + clamp_epsilon)
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValidationError(
            f"not a probability map: value {data[idx]!r} at voxel {idx} is outside "
            f"[-{clamp_epsilon}, 1 + {clamp_epsilon}]"
        )
    return ProbabilityMap(np.clip(data, 0.0, 1.0))
