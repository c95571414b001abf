"""Rank statistics used to quantify metric-vs-load bias.

Spearman's rho is computed as the Pearson correlation of average ranks
(tie-robust), Kendall's tau in its tie-corrected tau-b form, and the rank
regression is an ordinary least-squares fit of rank(y) against rank(x).
A slope near 1 means the metric ranking just reproduces the load ranking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    tau: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("correlation needs at least 2 samples")


def _as_finite_array(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1D sequence")
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xa = _as_finite_array(x, "x")
    ya = _as_finite_array(y, "y")
    if xa.size != ya.size:
        raise ValidationError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise ValidationError("need at least 2 paired samples")
    return xa, ya


def ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ascending ranks; ties receive the mean of their rank span."""
    arr = _as_finite_array(values, "values")
    order = np.argsort(arr, kind="stable")
    ranked = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranked[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranked


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of the rank vectors."""
    xa, ya = _paired(x, y)
    rx = ranks(xa) - (xa.size + 1) / 2.0
    ry = ranks(ya) - (ya.size + 1) / 2.0
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0.0 or syy == 0.0:
        raise ValidationError("spearman undefined: zero rank variance in x or y")
    return float(rx @ ry) / np.sqrt(sxx * syy)


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tau-b: (concordant - discordant) / sqrt((T0 - Tx) * (T0 - Ty))."""
    xa, ya = _paired(x, y)
    n = xa.size
    dx = np.sign(xa[:, None] - xa[None, :])
    dy = np.sign(ya[:, None] - ya[None, :])
    iu = np.triu_indices(n, k=1)
    prod = dx[iu] * dy[iu]
    c_minus_d = float(np.sum(prod))

    t0 = n * (n - 1) / 2.0
    tx = sum(m * (m - 1) / 2.0 for m in _tie_sizes(xa))
    ty = sum(m * (m - 1) / 2.0 for m in _tie_sizes(ya))
    denom = np.sqrt((t0 - tx) * (t0 - ty))
    if denom == 0.0:
        raise ValidationError("kendall tau undefined: all pairs tied in x or in y")
    return c_minus_d / float(denom)


def _tie_sizes(arr: np.ndarray) -> list[int]:
    _, counts = np.unique(arr, return_counts=True)
    return [int(c) for c in counts if c > 1]


def rank_regression(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """OLS fit of rank(y) against rank(x); returns (slope, intercept).

    With tie-free data the rank variances are equal, so the slope equals
    Spearman's rho.
    """
    xa, ya = _paired(x, y)
    rx = ranks(xa)
    ry = ranks(ya)
    mx = rx.mean()
    my = ry.mean()
    sxx = float((rx - mx) @ (rx - mx))
    if sxx == 0.0:
        raise ValidationError("rank regression undefined: zero variance in ranks of x")
    slope = float((rx - mx) @ (ry - my)) / sxx
    return slope, float(my - slope * mx)


def correlate(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman + Kendall in one result."""
    xa, ya = _paired(x, y)
    return CorrelationResult(rho=spearman(xa, ya), tau=kendall_tau(xa, ya), n=int(xa.size))
