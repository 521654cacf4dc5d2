"""Dataset ingestion, protected-group construction, and train/test splitting.

A dataset holds a numeric feature matrix, binary labels, and a designated
subset of columns treated as sensitive attributes. Simple protected groups
are indicators for one level of one sensitive attribute; continuous
sensitive attributes are discretized into equal-frequency bins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import SchemaError, ParseError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Immutable table of m samples with d numeric features and p sensitive columns.

    Categorical columns are integer-coded in ``feature_matrix``; the original
    string levels are kept in ``level_labels`` for reporting.
    """

    feature_matrix: np.ndarray        # (m, d) float64
    labels: np.ndarray                # (m,) int, values in {0, 1}
    feature_names: list[str]
    sensitive_names: list[str]
    level_labels: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        m, d = self.feature_matrix.shape
        if m < 1 or d < 1:
            raise ValidationError(f"dataset must have m >= 1 and d >= 1, got m={m}, d={d}")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise ValidationError("labels must take only values 0 and 1")
        missing = [s for s in self.sensitive_names if s not in self.feature_names]
        if missing:
            raise SchemaError(f"sensitive columns not among features: {missing}")
        self.feature_matrix.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def m(self) -> int:
        return self.feature_matrix.shape[0]

    @property
    def d(self) -> int:
        return self.feature_matrix.shape[1]

    @property
    def p(self) -> int:
        return len(self.sensitive_names)

    @property
    def sensitive_indices(self) -> list[int]:
        return [self.feature_names.index(s) for s in self.sensitive_names]

    @property
    def sensitive_matrix(self) -> np.ndarray:
        """(m, p) view of the sensitive columns of the feature matrix."""
        return self.feature_matrix[:, self.sensitive_indices]

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(
            feature_matrix=self.feature_matrix[rows].copy(),
            labels=self.labels[rows].copy(),
            feature_names=self.feature_names,
            sensitive_names=self.sensitive_names,
            level_labels=self.level_labels,
        )

    def level_label(self, name: str, code: float) -> str:
        """Human-readable label for a coded categorical level."""
        labels = self.level_labels.get(name)
        if labels is not None and float(code).is_integer() and 0 <= int(code) < len(labels):
            return labels[int(code)]
        return code if isinstance(code, str) else format(float(code), "g")


@dataclass(frozen=True)
class SimpleGroup:
    """Indicator for one level (or one bin) of one sensitive attribute."""

    sensitive_index: int              # position within the sensitive columns, 0..p-1
    level: float                      # categorical code, or bin index for binned columns
    label: str                        # display label, e.g. "sex=female" or "age=[15.0,17.0)"
    lo: float | None = None           # bin bounds; None for categorical levels
    hi: float | None = None

    def membership(self, ds: Dataset) -> np.ndarray:
        """Binary indicator vector of length ds.m."""
        if self.sensitive_index >= ds.p:
            raise ValidationError(
                f"sensitive_index {self.sensitive_index} out of range for p={ds.p}")
        col = ds.sensitive_matrix[:, self.sensitive_index]
        if self.lo is None:
            member = col == self.level
        else:
            member = (col >= self.lo) & (col <= self.hi) if self.is_last_bin else \
                     (col >= self.lo) & (col < self.hi)
        return member.astype(np.int8)

    @property
    def is_last_bin(self) -> bool:
        return self.hi is not None and math.isinf(self.hi)


@dataclass(frozen=True)
class GroupSet:
    """Ordered collection of simple protected groups (the first-level groups)."""

    groups: tuple[SimpleGroup, ...]
    sensitive_names: tuple[str, ...]

    def __post_init__(self):
        keys = [(g.sensitive_index, g.level) for g in self.groups]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (sensitive_index, level) pairs in group set")

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def membership_matrix(self, ds: Dataset) -> np.ndarray:
        """(|groups|, m) binary matrix of group memberships."""
        if len(self.groups) == 0:
            return np.zeros((0, ds.m), dtype=np.int8)
        return np.stack([g.membership(ds) for g in self.groups])

    def to_json(self) -> list[dict]:
        return [
            {"sensitive_name": self.sensitive_names[g.sensitive_index], "level": g.label}
            for g in self.groups
        ]


def _coerce_column(series: pd.Series, name: str) -> tuple[np.ndarray, list[str] | None]:
    """Return (float column, level labels or None for numeric columns).

    A column is numeric if every non-missing cell parses as a float,
    categorical if no cell parses; a mix is a parse error.
    """
    raw = series.to_numpy()
    parsed = pd.to_numeric(series, errors="coerce").to_numpy(dtype=float)
    present = ~pd.isna(raw)
    numeric_ok = ~np.isnan(parsed)
    if not present.any():
        raise ParseError(f"column '{name}' has no values")
    if (numeric_ok | ~present).all():
        # numeric column; impute missing cells with the column median
        if (~present).any():
            parsed[~present] = np.nanmedian(parsed)
        return parsed, None
    if not (numeric_ok & present).any():
        # categorical: stable integer coding by sorted level name
        labels = sorted(str(v) for v in set(raw[present]))
        if (~present).any():
            labels.append("<missing>")
        codes = np.array(
            [labels.index(str(v)) if ok else labels.index("<missing>")
             for v, ok in zip(raw, present)],
            dtype=float,
        )
        return codes, labels
    bad = int(np.flatnonzero(present & ~numeric_ok)[0])
    raise ParseError(
        f"non-numeric cell in numeric column '{name}' at row {bad}: {raw[bad]!r}")


def load_csv(path: str, sensitive_names: list[str], label_name: str) -> Dataset:
    """Load a UTF-8 comma-delimited CSV with a header row into a Dataset.

    Rows with missing label or sensitive values are dropped; missing numeric
    feature cells are imputed with the column median.
    """
    frame = pd.read_csv(path)
    if label_name not in frame.columns:
        raise SchemaError(f"label column '{label_name}' not in header")
    missing = [s for s in sensitive_names if s not in frame.columns]
    if missing:
        raise SchemaError(f"sensitive columns not in header: {missing}")

    keep = ~frame[label_name].isna()
    for s in sensitive_names:
        keep &= ~frame[s].isna()
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("dropped %d rows with missing label/sensitive values", dropped)
    frame = frame.loc[keep].reset_index(drop=True)
    if len(frame) == 0:
        raise ValidationError("no usable rows after dropping missing label/sensitive values")

    labels_raw = pd.to_numeric(frame[label_name], errors="coerce").to_numpy(dtype=float)
    if np.isnan(labels_raw).any() or not set(np.unique(labels_raw)) <= {0.0, 1.0}:
        raise ValidationError(
            f"label column '{label_name}' must be binary 0/1, "
            f"got values {sorted(set(labels_raw))[:6]}")

    feature_names = [c for c in frame.columns if c != label_name]
    if not feature_names:
        raise ValidationError("dataset must have at least one feature column (d >= 1)")

    columns = []
    level_labels: dict[str, list[str]] = {}
    for name in feature_names:
        col, labels = _coerce_column(frame[name], name)
        if labels is not None:
            level_labels[name] = labels
        columns.append(col)

    return Dataset(
        feature_matrix=np.column_stack(columns),
        labels=labels_raw.astype(int),
        feature_names=feature_names,
        sensitive_names=list(sensitive_names),
        level_labels=level_labels,
    )


def build_simple_groups(ds: Dataset, max_bins: int = 5) -> GroupSet:
    """One group per level of each categorical sensitive column; continuous
    columns are discretized into at most max_bins equal-frequency bins.

    A numeric column with more than max_bins distinct values is treated as
    continuous. Empty groups are dropped.
    """
    if ds.p == 0:
        logger.warning("dataset has no sensitive columns; group set is empty")
        return GroupSet(groups=(), sensitive_names=())

    groups: list[SimpleGroup] = []
    for j, name in enumerate(ds.sensitive_names):
        col = ds.sensitive_matrix[:, j]
        levels = np.unique(col)
        if name in ds.level_labels or len(levels) <= max_bins:
            for lv in levels:
                label = f"{name}={ds.level_label(name, lv)}"
                groups.append(SimpleGroup(sensitive_index=j, level=float(lv), label=label))
        else:
            qs = np.quantile(col, np.linspace(0, 1, max_bins + 1))
            edges = np.unique(qs)
            for b in range(len(edges) - 1):
                lo = float(edges[b])
                hi = float(edges[b + 1]) if b < len(edges) - 2 else math.inf
                g = SimpleGroup(
                    sensitive_index=j, level=float(b),
                    label=f"{name}=[{lo:g},{'inf' if math.isinf(hi) else format(hi, 'g')})",
                    lo=lo, hi=hi,
                )
                if g.membership(ds).sum() > 0:
                    groups.append(g)
    return GroupSet(groups=tuple(groups), sensitive_names=tuple(ds.sensitive_names))


def group_membership(g: SimpleGroup, ds: Dataset) -> np.ndarray:
    """Binary indicator vector for g over the rows of ds."""
    return g.membership(ds)


def train_test_split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic label-stratified split into (ceil(f*m), rest) rows."""
    if not 0 < fraction < 1:
        raise ValidationError(f"fraction must lie in (0, 1), got {fraction}")
    if ds.m < 2:
        raise ValidationError("need m >= 2 to split")

    rng = np.random.default_rng(seed)
    n_train = math.ceil(fraction * ds.m)
    idx0 = np.flatnonzero(ds.labels == 0)
    idx1 = np.flatnonzero(ds.labels == 1)
    if len(idx0) == 0 or len(idx1) == 0:
        logger.warning("single-class labels; falling back to unstratified split")
        perm = rng.permutation(ds.m)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    else:
        idx0 = rng.permutation(idx0)
        idx1 = rng.permutation(idx1)
        take0 = int(round(fraction * len(idx0)))
        take0 = min(max(take0, n_train - len(idx1)), min(len(idx0), n_train))
        take1 = n_train - take0
        train_idx = np.concatenate([idx0[:take0], idx1[:take1]])
        test_idx = np.concatenate([idx0[take0:], idx1[take1:]])
    train_idx.sort()
    test_idx.sort()
    return ds.subset(train_idx), ds.subset(test_idx)
