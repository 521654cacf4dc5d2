"""Shared fixtures: small hand datasets and a synthetic Student-schema CSV."""

import csv

import numpy as np
import pytest

from fairgp.data import Dataset

STUDENT_SENSITIVE = ["sex", "age", "romantic", "Dalc", "Walc"]
STUDENT_LABEL = "label"
STUDENT_ROWS = 395
STUDENT_FEATURES = 43


def _cyclic(values, m, rng):
    """Exact-coverage column: every level appears floor/ceil(m/len) times,
    randomly aligned against the other columns."""
    col = np.array([values[i % len(values)] for i in range(m)], dtype=object)
    return col[rng.permutation(m)]


def make_student_csv(path, seed=2024):
    """Deterministic dataset with the Student schema: 395 rows, 43 features,
    5 sensitive columns whose levels yield 22 simple groups."""
    rng = np.random.default_rng(seed)
    m = STUDENT_ROWS
    sex = _cyclic(["F", "M"], m, rng)
    age = _cyclic(list(range(15, 23)), m, rng)
    romantic = _cyclic(["no", "yes"], m, rng)
    dalc = _cyclic([1, 2, 3, 4, 5], m, rng)
    walc = _cyclic([1, 2, 3, 4, 5], m, rng)

    n_other = STUDENT_FEATURES - len(STUDENT_SENSITIVE)
    other = rng.normal(size=(m, n_other))
    weights = rng.normal(scale=0.4, size=n_other)
    score = (other @ weights
             + 0.8 * (sex == "F").astype(float)
             + 0.25 * (age.astype(float) - 18.5)
             + 0.3 * (dalc.astype(float) - 3)
             + rng.normal(scale=0.8, size=m))
    label = (score > np.median(score)).astype(int)

    header = (STUDENT_SENSITIVE
              + [f"g{i}" for i in range(n_other)]
              + [STUDENT_LABEL])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(m):
            writer.writerow(
                [sex[i], age[i], romantic[i], dalc[i], walc[i]]
                + [format(v, ".6f") for v in other[i]]
                + [label[i]])
    return path


@pytest.fixture(scope="session")
def student_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "student.csv"
    return str(make_student_csv(path))


def make_dataset(X, y, sensitive, names=None, level_labels=None):
    names = names or [f"c{i}" for i in range(X.shape[1])]
    return Dataset(
        feature_matrix=np.asarray(X, dtype=float),
        labels=np.asarray(y, dtype=int),
        feature_names=names,
        sensitive_names=sensitive,
        level_labels=level_labels or {},
    )


@pytest.fixture
def race_sex_dataset():
    """16 rows over race x sex with both label classes in every cell."""
    rng = np.random.default_rng(5)
    rows, labels = [], []
    for race in (0.0, 1.0):           # 0=black, 1=white
        for sex in (0.0, 1.0):        # 0=male, 1=female
            for y in (0, 1):
                for _ in range(2):
                    rows.append([race, sex, rng.normal()])
                    labels.append(y)
    return make_dataset(np.array(rows), labels, ["race", "sex"],
                        names=["race", "sex", "f0"],
                        level_labels={"race": ["black", "white"],
                                      "sex": ["male", "female"]})
