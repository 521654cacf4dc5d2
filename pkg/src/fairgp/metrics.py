"""Accuracy and fairness metrics over fitted classifiers.

Fairness of a classifier w.r.t. a group is the absolute gap between its
overall fitness and its fitness restricted to the group; marginal fairness
averages that gap over all simple groups. Accuracy is the exact-match
fraction and APS the pessimistic step-sum estimate of the area under the
precision-recall curve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupSet
from .errors import ValidationError

logger = logging.getLogger(__name__)


def fairness(f_overall: float, f_group: float) -> float:
    """Absolute fitness gap |f(n) - f(n,g)|."""
    return abs(f_overall - f_group)


def marginal_fairness(per_group_fairness) -> float:
    """Mean fitness gap over the simple groups."""
    values = np.asarray(per_group_fairness, dtype=float)
    if values.size == 0:
        raise ValidationError("marginal fairness needs at least one group value")
    return float(values.mean())


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValidationError("predictions and labels must be equal-length, non-empty")
    return float(np.mean(predictions == labels))


def average_precision(scores, labels) -> float | None:
    """Pessimistic step-sum AP: sum over distinct thresholds of (R_t - R_{t-1}) P_t.

    Samples with equal scores share one threshold step. Returns None when
    there are no positive labels.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must have equal length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        return None

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    npred = np.arange(1, len(y) + 1)
    # last index of each tied-score block = one threshold step
    block_end = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    recall = tp[block_end] / n_pos
    precision = tp[block_end] / npred[block_end]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


@dataclass(frozen=True)
class GroupRates:
    """FP/FN rates overall and per simple group; NaN marks undefined rates."""

    fp_overall: float
    fn_overall: float
    fp_by_group: np.ndarray        # (|groups|,), NaN where group has no negatives
    fn_by_group: np.ndarray        # (|groups|,), NaN where group has no positives
    counts: np.ndarray             # (|groups|,) member counts
    positives: np.ndarray
    negatives: np.ndarray


def _rate(errors: np.ndarray, denom: np.ndarray) -> float:
    d = int(denom.sum())
    return float(errors.sum() / d) if d > 0 else float("nan")


def group_rates(predictions, labels, groups: GroupSet, ds: Dataset) -> GroupRates:
    """False positive / false negative rates overall and per group."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if not (len(predictions) == len(labels) == ds.m):
        raise ValidationError("predictions, labels, and dataset must agree in length")
    neg = labels == 0
    pos = labels == 1
    fp = (predictions == 1) & neg
    fn = (predictions == 0) & pos

    member = groups.membership_matrix(ds).astype(bool)
    fp_by = np.array([_rate(fp[m], neg[m]) for m in member])
    fn_by = np.array([_rate(fn[m], pos[m]) for m in member])
    return GroupRates(
        fp_overall=_rate(fp, neg),
        fn_overall=_rate(fn, pos),
        fp_by_group=fp_by,
        fn_by_group=fn_by,
        counts=member.sum(axis=1),
        positives=(member & pos).sum(axis=1),
        negatives=(member & neg).sum(axis=1),
    )


def rate_based_marginal_fairness(rates: GroupRates, mode: str) -> float:
    """Marginal fairness with FP or FN rate as the fitness measure.

    Groups whose rate is undefined are excluded with a logged warning.
    """
    overall = rates.fp_overall if mode == "FP" else rates.fn_overall
    per_group = rates.fp_by_group if mode == "FP" else rates.fn_by_group
    defined = ~np.isnan(per_group)
    if not defined.all():
        logger.warning("excluding %d groups with undefined %s rate",
                       int((~defined).sum()), mode)
    if not defined.any() or np.isnan(overall):
        return 0.0
    return marginal_fairness(np.abs(overall - per_group[defined]))
