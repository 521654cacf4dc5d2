"""Pareto-front extraction, 2-D hypervolume, and paired statistics.

Solution points carry an accuracy-type metric (maximized) and a violation
metric (minimized). Hypervolume is computed in minimize-minimize space
(violation, 1 - accuracy) against the reference point (1, 1) after
violations have been normalized to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class SolutionPoint:
    accuracy_metric: float        # in [0, 1], maximized
    violation_metric: float       # >= 0, minimized
    individual_id: int = 0
    method: str = ""


@dataclass(frozen=True)
class HypervolumeReport:
    method: str
    objective_pair: str           # e.g. "fp_aps"
    hypervolume: float
    front: tuple[SolutionPoint, ...]

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "objective_pair": self.objective_pair,
            "hypervolume": self.hypervolume,
            "front": [
                {"accuracy_metric": p.accuracy_metric,
                 "violation_metric": p.violation_metric,
                 "individual_id": p.individual_id}
                for p in self.front
            ],
        }


def pareto_front(points: list[SolutionPoint]) -> list[SolutionPoint]:
    """Maximal points under (maximize accuracy, minimize violation),
    duplicates collapsed, sorted by violation ascending."""
    if not points:
        raise ValidationError("pareto_front needs at least one point")
    unique = sorted({(p.violation_metric, -p.accuracy_metric): p for p in points}.items())
    front: list[SolutionPoint] = []
    best_acc = -math.inf
    for (_, _), p in unique:
        if p.accuracy_metric > best_acc:
            front.append(p)
            best_acc = p.accuracy_metric
    return front


REFERENCE = (1.0, 1.0)


def hypervolume_2d(front: list[SolutionPoint],
                   reference: tuple[float, float] = REFERENCE) -> float:
    """Exact sweep-line area dominated by the front in (violation, error)
    space relative to the reference point."""
    if not front:
        raise ValidationError("hypervolume needs a non-empty front")
    pts = sorted((p.violation_metric, 1.0 - p.accuracy_metric) for p in front)
    ref_v, ref_e = reference
    for v, e in pts:
        if not (0.0 <= v <= ref_v and 0.0 <= e <= ref_e):
            raise ValidationError(
                f"point ({v}, {e}) outside the unit box; normalization bug")
    area = 0.0
    prev_e = ref_e
    for v, e in pts:
        if e >= prev_e:
            continue   # dominated in min-min space; contributes nothing
        area += (ref_v - v) * (prev_e - e)
        prev_e = e
    return area


def normalize_violations(points: list[SolutionPoint]) -> list[SolutionPoint]:
    """Scale violations by the maximum observed across all given points
    (all methods of one trial and objective pair)."""
    if not points:
        raise ValidationError("normalize_violations needs at least one point")
    vmax = max(p.violation_metric for p in points)
    if vmax <= 0:
        return list(points)
    return [replace(p, violation_metric=p.violation_metric / vmax) for p in points]


def _signed_rank_stat(diffs: np.ndarray) -> tuple[float, np.ndarray]:
    """(W+, midranks of |d|) for nonzero differences."""
    absd = np.abs(diffs)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(len(diffs))
    sorted_abs = absd[order]
    i = 0
    while i < len(diffs):
        j = i
        while j + 1 < len(diffs) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1   # midrank
        i = j + 1
    w_plus = float(ranks[diffs > 0].sum())
    return w_plus, ranks


def _exact_p(w_plus: float, ranks: np.ndarray) -> float:
    """Two-sided p by enumerating all 2^n sign assignments of the ranks.

    Ranks are doubled so midranks become integers for the DP over W+ values.
    """
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    counts /= counts.sum()
    w2 = int(round(2 * w_plus))
    p_low = counts[:w2 + 1].sum()
    p_high = counts[w2:].sum()
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def _approx_p(w_plus: float, ranks: np.ndarray) -> float:
    """Normal approximation with tie correction and continuity correction."""
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    z = (w_plus - mean - 0.5 * np.sign(w_plus - mean)) / math.sqrt(var)
    return float(min(1.0, math.erfc(abs(z) / math.sqrt(2.0))))


def wilcoxon_signed_rank(a, b, exact_max_n: int = 20) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped (all zero -> p = 1.0). The exact sign-flip
    distribution is enumerated up to exact_max_n nonzero pairs; beyond that
    a tie-corrected normal approximation is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("paired samples must have equal length")
    diffs = a - b
    diffs = diffs[diffs != 0]
    if len(diffs) == 0:
        return 1.0
    if len(diffs) < 5:
        raise ValidationError("need at least 5 nonzero differences")
    w_plus, ranks = _signed_rank_stat(diffs)
    if len(diffs) <= exact_max_n:
        return _exact_p(w_plus, ranks)
    return _approx_p(w_plus, ranks)


def bonferroni(p_values, m_comparisons: int) -> list[float]:
    """min(1, p * m) per entry."""
    return [min(1.0, float(p) * m_comparisons) for p in p_values]


def mean_ranks(scores_by_method: dict[str, list[float]]) -> dict[str, float]:
    """Rank methods per trial by score (higher is better, rank 1 best);
    ties get the average rank. Returns mean rank per method."""
    methods = sorted(scores_by_method)
    matrix = np.array([scores_by_method[m] for m in methods], dtype=float)
    n_methods, n_trials = matrix.shape
    ranks = np.zeros_like(matrix)
    for t in range(n_trials):
        col = -matrix[:, t]
        order = np.argsort(col, kind="stable")
        r = np.empty(n_methods)
        i = 0
        while i < n_methods:
            j = i
            while j + 1 < n_methods and col[order[j + 1]] == col[order[i]]:
                j += 1
            r[order[i:j + 1]] = (i + j) / 2 + 1
            i = j + 1
        ranks[:, t] = r
    return {m: float(ranks[k].mean()) for k, m in enumerate(methods)}
