"""Evaluation metrics: ranking error, l2 error, ties, percentiles, trial stats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats


class AllTiedError(ValueError):
    """The truth vector has no strictly ordered pair, so the ranking error is
    undefined."""


class EmptyStatisticsError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreVectorPair:
    """Aligned truth/estimate vectors keyed by review pair.

    ``tie_tolerance`` decides when two *estimate* values count as tied.
    Truth ties use ``truth_tie_tolerance``, exact equality by default since
    synthetic truths are constructed; loaders of file-borne reals set 1e-12.
    """

    truth: dict
    estimate: dict
    tie_tolerance: float = 1e-4
    truth_tie_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if set(self.truth) != set(self.estimate):
            raise ValueError("truth and estimate must be defined on the same keys")

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        keys = sorted(self.truth)
        t = np.array([self.truth[k] for k in keys], dtype=float)
        e = np.array([self.estimate[k] for k in keys], dtype=float)
        return t, e


_BLOCK = 512


def kendall_tau_error(pair: ScoreVectorPair) -> float:
    """Normalized ranking error of the estimate against the truth.

    Over all key pairs whose truth values differ (truth ties are omitted),
    count 1 for each pair the estimate orders the other way and 1/2 for each
    pair the estimate ties (absolute difference below ``tie_tolerance``),
    divided by the number of truth-ordered pairs. Comparisons are global
    across the whole vector, not per reviewer. Direct O(n^2) computation;
    this is the reference implementation that the sorting-based variant is
    verified against.
    """
    t, e = pair.arrays()
    n = t.shape[0]
    ordered = 0
    penalty = 0.0
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        dt = t[start:stop, None] - t[None, :]
        de = e[start:stop, None] - e[None, :]
        upper = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        is_ordered = upper & (np.abs(dt) > pair.truth_tie_tolerance)
        ordered += int(is_ordered.sum())
        oriented = np.sign(dt) * de
        # exact equality always ties, whatever the tolerance: equal values
        # order nothing, so the half penalty is the only sound treatment
        tied = (np.abs(de) < pair.tie_tolerance) | (de == 0.0)
        penalty += float((is_ordered & tied).sum()) * 0.5
        penalty += float((is_ordered & ~tied & (oriented < 0)).sum())
    if ordered == 0:
        raise AllTiedError("no strictly ordered truth pair")
    return penalty / ordered


def kendall_tau_error_fast(pair: ScoreVectorPair) -> float:
    """O(n log n) variant via merge-sort inversion counting.

    Only supports exact-equality ties (both tolerances zero): a positive
    tolerance makes "tied" non-transitive, which has no sorting-based
    formulation. Verified against ``kendall_tau_error`` in the test suite.
    """
    if pair.tie_tolerance != 0.0 or pair.truth_tie_tolerance != 0.0:
        raise ValueError("fast path requires exact-equality ties (zero tolerances)")
    t, e = pair.arrays()
    n = t.shape[0]
    order = np.lexsort((e, t))
    ts, es = t[order], e[order]

    total_pairs = n * (n - 1) // 2
    ordered = total_pairs - _tied_pairs(ts)
    if ordered == 0:
        raise AllTiedError("no strictly ordered truth pair")

    # lexsort puts estimate values inside each truth-tie run in ascending
    # order, so inversions of es count exactly the cross-run discordances;
    # estimate ties inside a run must likewise be excluded from the 1/2 term
    discordant = _count_inversions(es)
    e_ties_within = 0
    run_start = 0
    for i in range(1, n + 1):
        if i == n or ts[i] != ts[run_start]:
            e_ties_within += _tied_pairs(es[run_start:i])
            run_start = i
    e_ties_across = _tied_pairs(np.sort(e)) - e_ties_within
    return (discordant + 0.5 * e_ties_across) / ordered


def _tied_pairs(sorted_values: np.ndarray) -> int:
    count = 0
    n = sorted_values.shape[0]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        run = j - i + 1
        count += run * (run - 1) // 2
        i = j + 1
    return count


def _count_inversions(values: np.ndarray) -> int:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < 2:
        return 0
    mid = n // 2
    left = values[:mid].copy()
    right = values[mid:].copy()
    inv = _count_inversions(left) + _count_inversions(right)
    left.sort()
    right.sort()
    i = j = 0
    while i < left.shape[0] and j < right.shape[0]:
        if left[i] > right[j]:
            inv += left.shape[0] - i
            j += 1
        else:
            i += 1
    return inv


def l2_error(pair: ScoreVectorPair) -> float:
    t, e = pair.arrays()
    return float(np.linalg.norm(t - e))


def project_to_original_scale(y_hat):
    """Map a dequantized value on the coarse (half) scale back to the fine
    integer scale: round 2*y - 0.5 to the nearest integer, halves rounding up
    (so values in [1, 1.5) go to 2 and values in [1.5, 2) go to 3)."""
    arr = np.floor(2.0 * np.asarray(y_hat, dtype=float) - 0.5 + 0.5).astype(int)
    if np.ndim(y_hat) == 0:
        return int(arr)
    return arr


def tie_fraction(values, tolerance: float = 1e-4) -> float:
    """Fraction of unordered value pairs closer than ``tolerance``."""
    if isinstance(values, dict):
        values = np.array([values[k] for k in sorted(values)], dtype=float)
    else:
        values = np.asarray(values, dtype=float)
    n = values.shape[0]
    total = n * (n - 1) // 2
    if total == 0:
        return 0.0
    tied = 0
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        diff = np.abs(values[start:stop, None] - values[None, :])
        upper = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        tied += int((upper & (diff < tolerance)).sum())
    return tied / total


def percentiles(values: dict) -> dict:
    """Percentile rank (0..100) of each value among all values, ties sharing
    the mean rank: with n values, the k-th smallest sits at 100*(k - 0.5)/n."""
    keys = sorted(values)
    arr = np.array([values[k] for k in keys], dtype=float)
    ranks = scipy.stats.rankdata(arr, method="average")
    pct = 100.0 * (ranks - 0.5) / arr.shape[0]
    return {k: float(p) for k, p in zip(keys, pct)}


def trial_statistics(errors) -> tuple[float, float]:
    """Mean and standard error of the mean; a single trial has SEM 0 by
    convention."""
    arr = np.asarray(list(errors), dtype=float)
    if arr.size == 0:
        raise EmptyStatisticsError("no trials")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))
