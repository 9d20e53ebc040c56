"""Goodness-of-fit and moment comparisons for Monte Carlo output."""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import stats

MIN_KS_SAMPLES = 100


def ks_statistic(samples, cdf: Callable) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov distance and asymptotic p-value."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_KS_SAMPLES:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} samples, got {x.size}")
    res = stats.kstest(x, cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_two_sample(x, y) -> tuple[float, float]:
    res = stats.ks_2samp(np.asarray(x).ravel(), np.asarray(y).ravel(), method="asymp")
    return float(res.statistic), float(res.pvalue)


def merge_cells(expected: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Group consecutive cells left to right until each group expects >= ``threshold``.

    A short final group is folded into its predecessor. Returns ``[start, stop)`` pairs.
    """
    groups = []
    start, acc = 0, 0.0
    for i, e in enumerate(expected):
        acc += e
        if acc >= threshold:
            groups.append((start, i + 1))
            start, acc = i + 1, 0.0
    if start < len(expected):
        if groups:
            groups[-1] = (groups[-1][0], len(expected))
        else:
            groups.append((0, len(expected)))
    return groups


def chi_square_pmf(samples, pmf: Callable, threshold: float = 5.0) -> tuple[float, float, int]:
    """Pearson test of integer samples against ``pmf(n)`` on ``n = 0, 1, ...``.

    The support is cut where the remaining mass is negligible and the upper
    tail is lumped into the last cell. Cells are merged until every expected
    count is at least ``threshold``.

    Returns
    -------
    statistic, p_value, cells
    """
    x = np.asarray(samples).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise ValueError("samples must be nonnegative integers")
    x = x.astype(np.int64)
    n = x.size
    top = int(x.max())
    probs = np.asarray(pmf(np.arange(top + 1)), dtype=float)
    # extend until the unseen tail is below one part in 1e12
    while probs.sum() < 1.0 - 1e-12 and probs.size < 10 * (top + 1) + 1000:
        more = np.asarray(pmf(np.arange(probs.size, 2 * probs.size)), dtype=float)
        probs = np.concatenate([probs, more])
    observed = np.bincount(x, minlength=probs.size).astype(float)
    probs = probs.copy()
    probs[-1] += max(0.0, 1.0 - probs.sum())
    expected = n * probs
    groups = merge_cells(expected, threshold)
    if len(groups) < 2:
        raise ValueError("all mass falls in one cell after merging")
    obs = np.array([observed[a:b].sum() for a, b in groups])
    exp = np.array([expected[a:b].sum() for a, b in groups])
    stat = float(np.sum((obs - exp) ** 2 / exp))
    p = float(stats.chi2.sf(stat, len(groups) - 1))
    return stat, p, len(groups)


def mean_and_se(x, axis: int = 0):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    if n < 2:
        return x.mean(axis=axis), np.zeros_like(x.mean(axis=axis))
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / np.sqrt(n)


def within_se(analytic, empirical, se, sigma: float = 3.0) -> bool:
    return bool(np.all(np.abs(np.asarray(analytic) - np.asarray(empirical)) <= sigma * np.asarray(se)))


def lt_distance(empirical: np.ndarray, analytic: np.ndarray) -> float:
    """Sup distance between transforms over an s-grid."""
    return float(np.max(np.abs(np.asarray(empirical) - np.asarray(analytic))))
