import numpy as np
import pytest

from segscore import BinaryMask, ProbabilityMap


def mask(flat, dims=None):
    """Binary mask from a flat 0/1 list; defaults to an (n, 1, 1) column."""
    arr = np.asarray(flat)
    if dims is None:
        dims = (arr.size, 1, 1)
    return BinaryMask(arr.reshape(dims).astype(bool))


def prob_map(flat, dims=None):
    arr = np.asarray(flat, dtype=np.float64)
    if dims is None:
        dims = (arr.size, 1, 1)
    return ProbabilityMap(arr.reshape(dims))


@pytest.fixture
def four_voxel_pair():
    """The worked 4-voxel example: tp=1, fp=1, fn=1, tn=1."""
    return mask([1, 1, 0, 0]), mask([1, 0, 1, 0])
