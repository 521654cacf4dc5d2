"""Parent selection and survival strategies.

Implements tournament selection, epsilon-lexicase over training samples,
fair epsilon-lexicase (FLEX) over protected groups, and the NSGA2
non-dominated sorting / crowding-distance machinery. The near-best
tolerance epsilon is the median absolute deviation of the losses in the
current selection pool.

Individuals whose predictions are constant on the training data are the
trivially "fair" solutions; they are excluded from parent-selection pools
and ranked behind every front during survival.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroupSet
from .metrics import marginal_fairness
from .model import Individual, loss_matrix


@dataclass(frozen=True)
class FitnessTable:
    """Cached per-individual losses backing every selection strategy."""

    sample_losses: np.ndarray     # (N, m)
    overall: np.ndarray           # (N,) mean loss f(n)
    group_losses: np.ndarray      # (N, G) f(n, g); NaN where g is empty on the data
    group_fairness: np.ndarray    # (N, G) |f(n) - f(n, g)|
    objectives: np.ndarray        # (N, n_obj) minimized by NSGA2
    constant_mask: np.ndarray     # (N,) True for constant-output individuals

    @property
    def n(self) -> int:
        return self.sample_losses.shape[0]

    def eligible(self) -> np.ndarray:
        """Candidate indices for parent selection (non-constant individuals,
        falling back to everyone when the whole population is constant)."""
        ok = np.flatnonzero(~self.constant_mask)
        return ok if ok.size else np.arange(self.n)


def build_fitness_table(individuals: list[Individual], ds: Dataset, groups: GroupSet,
                        include_complexity: bool = True) -> FitnessTable:
    matrices = [loss_matrix(ind, ds) for ind in individuals]
    sample_losses = np.stack([lm.losses for lm in matrices])
    overall = sample_losses.mean(axis=1)
    constant = np.array([len(np.unique(lm.predictions)) == 1 for lm in matrices])

    member = groups.membership_matrix(ds).astype(bool)
    n, G = len(individuals), len(groups)
    group_losses = np.full((n, G), np.nan)
    for j in range(G):
        if member[j].any():
            group_losses[:, j] = sample_losses[:, member[j]].mean(axis=1)
    group_fairness = np.abs(overall[:, None] - group_losses)

    defined = ~np.isnan(group_losses).all(axis=0)
    if G and defined.any():
        marg = np.array([marginal_fairness(row[defined]) for row in group_fairness])
    else:
        marg = np.zeros(n)
    cols = [overall, marg]
    if include_complexity:
        cols.append(np.array([float(ind.complexity()) for ind in individuals]))
    return FitnessTable(
        sample_losses=sample_losses,
        overall=overall,
        group_losses=group_losses,
        group_fairness=group_fairness,
        objectives=np.column_stack(cols),
        constant_mask=constant,
    )


def mad_epsilon(losses) -> float:
    """Median absolute deviation; even-length medians use the midpoint."""
    losses = np.asarray(losses, dtype=float)
    assert losses.size > 0
    med = np.median(losses)
    return float(np.median(np.abs(losses - med)))


def epsilon_lexicase_select(table: FitnessTable, rng: np.random.Generator) -> int:
    """One parent via epsilon-lexicase over training samples as cases."""
    pool = table.eligible()
    cases = rng.permutation(table.sample_losses.shape[1])
    for c in cases:
        if len(pool) <= 1:
            break
        vals = table.sample_losses[pool, c]
        eps = mad_epsilon(vals)
        pool = pool[vals <= vals.min() + eps]
    return int(pool[int(rng.integers(len(pool)))])


def flex_select(table: FitnessTable, rng: np.random.Generator,
                trace: list | None = None,
                case_order: list[int] | None = None,
                branches: list[str] | None = None,
                epsilon: float | None = None) -> int:
    """One parent via fair epsilon-lexicase over protected groups as cases.

    Each visited group is evaluated either as group loss or as group
    fairness, chosen by a fair coin. Groups empty on the data exert no
    pressure. case_order / branches / epsilon exist for tracing and
    structural tests; by default the group sequence is a uniform random
    permutation, branches are coin flips, and epsilon is the pool MAD.
    """
    pool = table.eligible()
    n_groups = table.group_losses.shape[1]
    remaining = list(range(n_groups))
    step = 0
    while remaining and len(pool) > 1:
        if case_order is not None:
            g = case_order[step]
            remaining.remove(g)
        else:
            g = remaining.pop(int(rng.integers(len(remaining))))
        if branches is not None:
            branch = branches[step]
        else:
            branch = "loss" if rng.random() < 0.5 else "fairness"
        step += 1
        source = table.group_losses if branch == "loss" else table.group_fairness
        vals = source[pool, g]
        if np.isnan(vals).any():
            # group empty on the data: skip without filtering
            if trace is not None:
                trace.append({"group": int(g), "branch": branch, "skipped": True,
                              "pool_size": int(len(pool))})
            continue
        eps = mad_epsilon(vals) if epsilon is None else epsilon
        pool = pool[vals <= vals.min() + eps]
        if trace is not None:
            trace.append({"group": int(g), "branch": branch, "skipped": False,
                          "pool_size": int(len(pool))})
    return int(pool[int(rng.integers(len(pool)))])


def tournament_select(table: FitnessTable, k: int, rng: np.random.Generator) -> int:
    """Best overall loss among k draws with replacement; ties uniform."""
    assert k >= 1
    pool = table.eligible()
    drawn = pool[rng.integers(len(pool), size=k)]
    losses = table.overall[drawn]
    best = drawn[losses == losses.min()]
    return int(best[int(rng.integers(len(best)))])


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(objectives) -> list[list[int]]:
    """Fast non-dominated sort into fronts of indices (all objectives minimized)."""
    objs = np.asarray(objectives, dtype=float)
    n = len(objs)
    assert n > 0
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = np.zeros(n, dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if _dominates(objs[i], objs[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif _dominates(objs[j], objs[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts = [sorted(np.flatnonzero(domination_count == 0).tolist())]
    while True:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        if not nxt:
            return fronts
        fronts.append(sorted(nxt))


def crowding_distance(front_objectives) -> np.ndarray:
    """NSGA2 crowding distance; per-objective extremes get infinity."""
    objs = np.asarray(front_objectives, dtype=float)
    n, n_obj = objs.shape
    assert n > 0
    dist = np.zeros(n)
    for k in range(n_obj):
        order = np.argsort(objs[:, k], kind="stable")
        lo, hi = objs[order[0], k], objs[order[-1], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = hi - lo
        if span <= 0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            dist[i] += (objs[order[pos + 1], k] - objs[order[pos - 1], k]) / span
    return dist


def nsga2_survive(objectives, n_survivors: int, rng: np.random.Generator,
                  constant_mask=None) -> list[int]:
    """Survivor indices by front rank, truncating the last admitted front by
    descending crowding distance. Constant-output individuals rank behind
    every front."""
    objs = np.asarray(objectives, dtype=float)
    assert len(objs) >= n_survivors
    indices = np.arange(len(objs))
    if constant_mask is not None and np.asarray(constant_mask).any():
        constant_mask = np.asarray(constant_mask, dtype=bool)
        regular = indices[~constant_mask]
        trivial = indices[constant_mask]
        fronts = [[int(regular[i]) for i in f]
                  for f in nondominated_sort(objs[regular])] if regular.size else []
        fronts.append(trivial.tolist())
    else:
        fronts = nondominated_sort(objs)

    survivors: list[int] = []
    for front in fronts:
        if len(survivors) + len(front) <= n_survivors:
            survivors.extend(front)
            continue
        need = n_survivors - len(survivors)
        if need > 0:
            dist = crowding_distance(objs[front])
            order = sorted(range(len(front)), key=lambda i: (-dist[i], front[i]))
            survivors.extend(front[i] for i in order[:need])
        break
    return survivors
