"""Rank statistics against hand values, naive oracles, and scipy."""

import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from segscore import (
    ValidationError,
    correlate,
    kendall_tau,
    rank_regression,
    ranks,
    spearman,
)
from oracles import (
    naive_kendall_tau_b,
    naive_rank_regression,
    naive_ranks,
    naive_spearman,
)


class TestRanks:
    def test_distinct_values(self):
        np.testing.assert_array_equal(ranks([10, 30, 20]), [1, 3, 2])

    def test_tie_gets_average_rank(self):
        np.testing.assert_array_equal(ranks([5, 5, 7]), [1.5, 1.5, 3])

    def test_constant_vector(self):
        np.testing.assert_array_equal(ranks([4, 4, 4, 4]), [2.5] * 4)

    def test_rank_sum_is_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(1, 30))
            values = rng.integers(0, 5, size=n).astype(float)
            assert ranks(values).sum() == pytest.approx(n * (n + 1) / 2)

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            ranks([1.0, np.nan])


class TestSpearman:
    def test_identical_ordering(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed_ordering(self):
        assert spearman([1, 2, 3, 4], [9, 7, 5, 3]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8, abs=1e-15)

    def test_constant_input_is_error(self):
        with pytest.raises(ValidationError, match="zero rank variance"):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(ValidationError, match="zero rank variance"):
            spearman([1, 2, 3], [5, 5, 5])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError, match="length mismatch"):
            spearman([1, 2], [1, 2, 3])


class TestKendall:
    def test_identical_ordering(self):
        assert kendall_tau([1, 2, 3], [4, 5, 6]) == pytest.approx(1.0)

    def test_reversed_ordering(self):
        assert kendall_tau([1, 2, 3], [6, 5, 4]) == pytest.approx(-1.0)

    def test_single_swap(self):
        assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=1e-15)

    def test_all_tied_is_error(self):
        with pytest.raises(ValidationError, match="tied"):
            kendall_tau([1, 1, 1], [1, 2, 3])


class TestRankRegression:
    def test_identity(self):
        slope, intercept = rank_regression([3, 1, 2], [30, 10, 20])
        assert slope == pytest.approx(1.0)
        assert intercept == pytest.approx(0.0)

    def test_reversed_n5(self):
        slope, intercept = rank_regression([1, 2, 3, 4, 5], [5, 4, 3, 2, 1])
        assert slope == pytest.approx(-1.0)
        assert intercept == pytest.approx(6.0)

    def test_slope_equals_spearman_without_ties(self):
        x, y = [1, 2, 3, 4], [1, 3, 2, 4]
        slope, _ = rank_regression(x, y)
        assert slope == pytest.approx(spearman(x, y), abs=1e-15)
        assert slope == pytest.approx(0.8, abs=1e-15)

    def test_constant_x_is_error(self):
        with pytest.raises(ValidationError, match="zero variance"):
            rank_regression([2, 2, 2], [1, 2, 3])


TIE_PATTERNS = {
    2: [(1, 2)],
    3: [(1, 2, 3), (1, 1, 2)],
    4: [(1, 2, 3, 4), (1, 1, 2, 3), (1, 1, 2, 2)],
    5: [(1, 2, 3, 4, 5), (1, 1, 2, 3, 4), (1, 1, 2, 2, 3)],
    6: [(1, 2, 3, 4, 5, 6), (1, 1, 2, 3, 4, 5), (1, 1, 2, 2, 3, 3)],
}


def all_permutation_cases():
    for n, patterns in TIE_PATTERNS.items():
        x = list(range(1, n + 1))
        for pattern in patterns:
            seen = set()
            for perm in itertools.permutations(pattern):
                if perm in seen:
                    continue
                seen.add(perm)
                yield x, list(perm)


def test_exhaustive_permutations_match_naive_oracle():
    cases = 0
    for x, y in all_permutation_cases():
        fx = [float(v) for v in x]
        fy = [float(v) for v in y]
        assert list(ranks(fy)) == pytest.approx(naive_ranks(fy), abs=1e-12)
        assert spearman(fx, fy) == pytest.approx(naive_spearman(fx, fy), abs=1e-12)
        assert kendall_tau(fx, fy) == pytest.approx(
            naive_kendall_tau_b(fx, fy), abs=1e-12)
        slope, intercept = rank_regression(fx, fy)
        oracle_slope, oracle_intercept = naive_rank_regression(fx, fy)
        assert slope == pytest.approx(oracle_slope, abs=1e-12)
        assert intercept == pytest.approx(oracle_intercept, abs=1e-12)
        cases += 1
    assert cases == 1433  # every distinct permutation of every pattern ran


def test_cross_check_against_scipy():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(3, 40))
        x = rng.integers(0, 8, size=n).astype(float)
        y = rng.integers(0, 8, size=n).astype(float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        assert spearman(x, y) == pytest.approx(
            scipy.stats.spearmanr(x, y).statistic, abs=1e-12)
        assert kendall_tau(x, y) == pytest.approx(
            scipy.stats.kendalltau(x, y).statistic, abs=1e-12)


vectors_st = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=40)


@st.composite
def paired_vectors(draw):
    # integer-valued floats: any strictly increasing transform of them is
    # guaranteed to stay distinct at double precision
    n = draw(st.integers(2, 30))
    values = st.integers(-10**6, 10**6).map(float)
    x = draw(st.lists(values, min_size=n, max_size=n))
    y = draw(st.lists(values, min_size=n, max_size=n))
    return x, y


def _usable(x, y):
    return len(set(x)) > 1 and len(set(y)) > 1


@given(paired_vectors())
def test_symmetry_and_bounds(pair):
    x, y = pair
    if not _usable(x, y):
        return
    rho = spearman(x, y)
    tau = kendall_tau(x, y)
    assert -1.0 <= rho <= 1.0
    assert -1.0 <= tau <= 1.0
    assert spearman(y, x) == pytest.approx(rho, abs=1e-12)
    assert kendall_tau(y, x) == pytest.approx(tau, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(paired_vectors(), st.integers(0, 2**32 - 1))
def test_monotone_transform_invariance(pair, seed):
    x, y = pair
    if not _usable(x, y):
        return
    # strictly increasing map: exp scaled plus a rank-preserving offset
    tx = [float(np.exp(v / 2001.0)) for v in x]
    assert spearman(tx, y) == pytest.approx(spearman(x, y), abs=1e-12)
    assert kendall_tau(tx, y) == pytest.approx(kendall_tau(x, y), abs=1e-12)
    assert rank_regression(tx, y)[0] == pytest.approx(
        rank_regression(x, y)[0], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(paired_vectors(), st.integers(0, 2**32 - 1))
def test_joint_permutation_invariance(pair, seed):
    x, y = pair
    if not _usable(x, y):
        return
    perm = np.random.default_rng(seed).permutation(len(x))
    px = [x[i] for i in perm]
    py = [y[i] for i in perm]
    assert spearman(px, py) == pytest.approx(spearman(x, y), abs=1e-12)
    assert kendall_tau(px, py) == pytest.approx(kendall_tau(x, y), abs=1e-12)
    assert rank_regression(px, py)[0] == pytest.approx(
        rank_regression(x, y)[0], abs=1e-12)


def test_tie_free_spearman_matches_classic_formula():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n = int(rng.integers(2, 50))
        x = rng.permutation(n).astype(float)
        y = rng.permutation(n).astype(float)
        d = ranks(x) - ranks(y)
        classic = 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1)) if n > 1 else 1.0
        if n == 1:
            continue
        assert spearman(x, y) == pytest.approx(classic, abs=1e-12)


def test_correlate_bundles_both_statistics():
    res = correlate([1, 2, 3, 4], [1, 3, 2, 4])
    assert res.rho == pytest.approx(0.8)
    assert res.n == 4
    assert -1 <= res.tau <= 1
