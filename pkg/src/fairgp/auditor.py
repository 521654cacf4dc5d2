"""Rich-subgroup fairness auditing over conjunctions of simple groups.

The FP-Violation of a group g is alpha * beta, where alpha is the fraction
of all samples that are in g with the relevant true class (negatives for FP,
positives for FN) and beta is the absolute gap between the overall error
rate and the rate inside g. The auditor exhaustively maximizes the violation
over all conjunctions of up to max_terms simple groups drawn from distinct
sensitive attributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import Dataset, GroupSet, SimpleGroup
from .errors import ValidationError


@dataclass(frozen=True)
class ConjunctionGroup:
    """AND of simple groups over distinct sensitive attributes; empty = universal."""

    terms: tuple[SimpleGroup, ...]

    def __post_init__(self):
        idx = [t.sensitive_index for t in self.terms]
        if len(set(idx)) != len(idx):
            raise ValidationError("conjunction terms must use distinct sensitive attributes")

    def membership(self, ds: Dataset) -> np.ndarray:
        member = np.ones(ds.m, dtype=bool)
        for t in self.terms:
            member &= t.membership(ds).astype(bool)
        return member

    def describe(self, sensitive_names) -> list[dict]:
        return [
            {"sensitive_name": sensitive_names[t.sensitive_index], "level": t.label}
            for t in self.terms
        ]


@dataclass(frozen=True)
class AuditResult:
    worst_group: ConjunctionGroup
    violation: float
    mode: str                      # "FP" or "FN"
    alpha: float                   # weight of the group under the empirical distribution
    beta: float                    # rate disparity inside the group

    def to_json(self, sensitive_names) -> dict:
        return {
            "mode": self.mode,
            "violation": self.violation,
            "alpha": self.alpha,
            "beta": self.beta,
            "group": self.worst_group.describe(sensitive_names),
        }


def _check_mode(mode: str) -> None:
    if mode not in ("FP", "FN"):
        raise ValidationError(f"mode must be 'FP' or 'FN', got {mode!r}")


def _violation_parts(predictions, labels, member, mode):
    """(alpha, beta) of one conjunction; beta is 0 when the group has no
    samples of the relevant class."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if mode == "FP":
        relevant = labels == 0
        errors = (predictions == 1) & relevant
    else:
        relevant = labels == 1
        errors = (predictions == 0) & relevant
    m = len(labels)
    n_rel = int(relevant.sum())
    overall = errors.sum() / n_rel if n_rel else 0.0

    in_rel = relevant & member
    alpha = float(in_rel.sum() / m)
    if not in_rel.any():
        return alpha, 0.0
    group_rate = errors[member].sum() / in_rel.sum()
    return alpha, float(abs(overall - group_rate))


def violation(predictions, labels, g: ConjunctionGroup, ds: Dataset, mode: str) -> float:
    """alpha(g) * |rate(n) - rate(n, g)| for the given error mode."""
    _check_mode(mode)
    if len(np.asarray(predictions)) != ds.m:
        raise ValidationError("predictions must align with dataset rows")
    alpha, beta = _violation_parts(predictions, labels, g.membership(ds), mode)
    return alpha * beta


def _term_key(g: SimpleGroup):
    return (g.sensitive_index, g.level)


def enumerate_conjunctions(groups: GroupSet, ds: Dataset, max_terms: int):
    """All conjunctions of <= max_terms simple groups with distinct attributes,
    in lexicographic term order, plus their membership matrix.

    Returns (list of ConjunctionGroup, (C, m) boolean membership matrix).
    The universal (0-term) conjunction comes first.
    """
    if max_terms < 1:
        raise ValidationError("max_terms must be >= 1")
    simple = sorted(groups.groups, key=_term_key)
    memberships = {_term_key(g): g.membership(ds).astype(bool) for g in simple}
    by_attr: dict[int, list[SimpleGroup]] = {}
    for g in simple:
        by_attr.setdefault(g.sensitive_index, []).append(g)

    conjunctions: list[ConjunctionGroup] = [ConjunctionGroup(terms=())]
    rows: list[np.ndarray] = [np.ones(ds.m, dtype=bool)]
    attrs = sorted(by_attr)
    for k in range(1, min(max_terms, len(attrs)) + 1):
        for attr_combo in combinations(attrs, k):
            pools = [by_attr[a] for a in attr_combo]
            for terms in _product_sorted(pools):
                member = memberships[_term_key(terms[0])].copy()
                for t in terms[1:]:
                    member &= memberships[_term_key(t)]
                conjunctions.append(ConjunctionGroup(terms=terms))
                rows.append(member)
    order = sorted(range(len(conjunctions)),
                   key=lambda i: tuple(_term_key(t) for t in conjunctions[i].terms))
    return [conjunctions[i] for i in order], np.stack([rows[i] for i in order])


def _product_sorted(pools):
    if not pools:
        yield ()
        return
    for g in pools[0]:
        for rest in _product_sorted(pools[1:]):
            yield (g,) + rest


def _batch_violations(predictions, labels, member_matrix, mode):
    """Vectorized (alpha, beta) for every conjunction row of member_matrix."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if mode == "FP":
        relevant = labels == 0
        errors = (predictions == 1) & relevant
    else:
        relevant = labels == 1
        errors = (predictions == 0) & relevant
    m = len(labels)
    n_rel = int(relevant.sum())
    overall = errors.sum() / n_rel if n_rel else 0.0

    rel_in = member_matrix @ relevant.astype(np.int64)
    err_in = member_matrix @ errors.astype(np.int64)
    alpha = rel_in / m
    with np.errstate(invalid="ignore", divide="ignore"):
        group_rate = np.where(rel_in > 0, err_in / np.maximum(rel_in, 1), overall)
    beta = np.abs(overall - group_rate)
    beta[rel_in == 0] = 0.0
    return alpha, beta


def audit_exhaustive(predictions, labels, groups: GroupSet, ds: Dataset,
                     mode: str, max_terms: int = 3) -> AuditResult:
    """Exact maximizer of the violation over all bounded conjunctions.

    Ties are broken toward the lexicographically smallest term list (the
    universal group wins when every violation is zero).
    """
    _check_mode(mode)
    if len(groups) == 0:
        return AuditResult(ConjunctionGroup(terms=()), 0.0, mode, 0.0, 0.0)
    conjunctions, member_matrix = enumerate_conjunctions(groups, ds, max_terms)
    alpha, beta = _batch_violations(predictions, labels, member_matrix, mode)
    violations = alpha * beta
    best = int(np.argmax(violations))  # first max = lexicographically smallest
    return AuditResult(
        worst_group=conjunctions[best],
        violation=float(violations[best]),
        mode=mode,
        alpha=float(alpha[best]),
        beta=float(beta[best]),
    )


def audit_all(population_predictions, labels, groups: GroupSet, ds: Dataset,
              mode: str, max_terms: int = 3) -> list[AuditResult | Exception]:
    """Audit a batch of prediction vectors; per-item failures are recorded
    in place instead of aborting the batch."""
    if len(population_predictions) == 0:
        raise ValidationError("audit_all needs at least one prediction vector")
    _check_mode(mode)
    if len(groups) == 0:
        return [AuditResult(ConjunctionGroup(terms=()), 0.0, mode, 0.0, 0.0)
                for _ in population_predictions]
    conjunctions, member_matrix = enumerate_conjunctions(groups, ds, max_terms)
    results: list[AuditResult | Exception] = []
    for preds in population_predictions:
        try:
            if len(np.asarray(preds)) != ds.m:
                raise ValidationError("predictions must align with dataset rows")
            alpha, beta = _batch_violations(preds, labels, member_matrix, mode)
            violations = alpha * beta
            best = int(np.argmax(violations))
            results.append(AuditResult(conjunctions[best], float(violations[best]),
                                       mode, float(alpha[best]), float(beta[best])))
        except Exception as exc:  # noqa: BLE001 - per-item failure record
            results.append(exc)
    return results
