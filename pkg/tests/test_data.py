import csv

import numpy as np
import pytest

from fairgp.data import (build_simple_groups, group_membership, load_csv,
                         train_test_split)
from fairgp.errors import ParseError, SchemaError, ValidationError

from conftest import STUDENT_LABEL, STUDENT_SENSITIVE, make_dataset


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def test_load_student_shape(student_csv):
    ds = load_csv(student_csv, STUDENT_SENSITIVE, STUDENT_LABEL)
    assert ds.m == 395
    assert ds.d == 43
    assert ds.p == 5


def test_load_rejects_label_only_file(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["label"], [[1]])
    with pytest.raises(ValidationError):
        load_csv(path, [], "label")


def test_load_rejects_nonbinary_labels(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "label"], [[0.5, 1], [0.1, 2]])
    with pytest.raises(ValidationError):
        load_csv(path, [], "label")


def test_load_missing_column_is_schema_error(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "label"], [[1, 0]])
    with pytest.raises(SchemaError):
        load_csv(path, ["nope"], "label")
    with pytest.raises(SchemaError):
        load_csv(path, [], "y")


def test_load_mixed_column_is_parse_error_with_location(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "label"],
                     [[1.5, 0], ["oops", 1], [2.5, 0]])
    with pytest.raises(ParseError, match="row 1.*oops"):
        load_csv(path, [], "label")


def test_load_drops_rows_with_missing_sensitive(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["s", "a", "label"],
                     [["u", 1.0, 0], ["", 2.0, 1], ["v", 3.0, 1]])
    ds = load_csv(path, ["s"], "label")
    assert ds.m == 2


def test_load_imputes_numeric_missing_with_median(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "label"],
                     [[1.0, 0], ["", 1], [3.0, 0], [5.0, 1]])
    ds = load_csv(path, [], "label")
    assert ds.feature_matrix[1, 0] == 3.0


def test_race_sex_groups(race_sex_dataset):
    groups = build_simple_groups(race_sex_dataset, max_bins=5)
    assert len(groups) == 4
    labels = [g.label for g in groups]
    assert "race=black" in labels and "sex=female" in labels


def test_student_simple_group_count(student_csv):
    ds = load_csv(student_csv, STUDENT_SENSITIVE, STUDENT_LABEL)
    groups = build_simple_groups(ds, max_bins=8)
    assert len(groups) == 22


def test_single_level_sensitive_feature():
    ds = make_dataset(np.ones((5, 2)), [0, 1, 0, 1, 0], ["c0"])
    groups = build_simple_groups(ds, max_bins=5)
    assert len(groups) == 1
    assert group_membership(groups.groups[0], ds).sum() == 5


def test_no_sensitive_columns_gives_empty_groupset():
    ds = make_dataset(np.ones((3, 1)), [0, 1, 0], [])
    assert len(build_simple_groups(ds, 5)) == 0


def test_continuous_sensitive_binning():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.normal(size=200), rng.normal(size=200)])
    ds = make_dataset(X, rng.integers(0, 2, 200), ["c0"])
    groups = build_simple_groups(ds, max_bins=4)
    assert len(groups) == 4
    member = groups.membership_matrix(ds)
    # equal-frequency bins partition the column
    assert (member.sum(axis=0) == 1).all()
    assert member.sum(axis=1).min() >= 40


def test_group_membership_indicator(race_sex_dataset):
    groups = build_simple_groups(race_sex_dataset, 5)
    female = next(g for g in groups if g.label == "sex=female")
    expected = (race_sex_dataset.feature_matrix[:, 1] == 1.0).astype(int)
    assert (group_membership(female, race_sex_dataset) == expected).all()


def test_levels_partition_each_sensitive_column(race_sex_dataset):
    groups = build_simple_groups(race_sex_dataset, 5)
    member = groups.membership_matrix(race_sex_dataset)
    for j in range(race_sex_dataset.p):
        idx = [k for k, g in enumerate(groups) if g.sensitive_index == j]
        assert (member[idx].sum(axis=0) == 1).all()


def test_build_simple_groups_idempotent(race_sex_dataset):
    a = build_simple_groups(race_sex_dataset, 5)
    b = build_simple_groups(race_sex_dataset, 5)
    assert a == b


def test_split_sizes_and_disjointness(student_csv):
    ds = load_csv(student_csv, STUDENT_SENSITIVE, STUDENT_LABEL)
    train, test = train_test_split(ds, 0.5, 11)
    assert (train.m, test.m) == (198, 197)
    # stratified: class balance preserved within 1 sample
    assert abs(int(train.labels.sum()) - int(test.labels.sum())) <= 1


def test_split_deterministic(student_csv):
    ds = load_csv(student_csv, STUDENT_SENSITIVE, STUDENT_LABEL)
    a1, b1 = train_test_split(ds, 0.5, 3)
    a2, b2 = train_test_split(ds, 0.5, 3)
    assert (a1.feature_matrix == a2.feature_matrix).all()
    assert (b1.labels == b2.labels).all()


def test_split_single_class_falls_back():
    ds = make_dataset(np.arange(10).reshape(10, 1), [0] * 10, [])
    train, test = train_test_split(ds, 0.5, 0)
    assert train.m == 5 and test.m == 5


def test_split_rejects_bad_fraction(race_sex_dataset):
    with pytest.raises(ValidationError):
        train_test_split(race_sex_dataset, 1.5, 0)


def test_group_built_on_train_may_be_empty_on_test():
    X = np.column_stack([np.array([0.0] * 6 + [1.0] * 2), np.arange(8)])
    ds = make_dataset(X, [0, 1] * 4, ["c0"])
    groups = build_simple_groups(ds, 5)
    rare = next(g for g in groups if g.level == 1.0)
    subset = ds.subset(np.arange(4))
    assert group_membership(rare, subset).sum() == 0
