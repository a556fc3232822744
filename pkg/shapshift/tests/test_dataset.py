import numpy as np
import pytest

from shapshift.data_handling import dataset as dsm
from shapshift.data_handling.dataset import DatasetError


def _toy_dataset(n_rows=10):
    rows = np.arange(n_rows, dtype=float)
    return dsm.from_arrays(np.column_stack([rows * 10, rows]), rows + 0.5, ["b", "a"])


def test_from_arrays_sorts_columns_by_name():
    ds = _toy_dataset(3)

    assert ds.feature_names == ("a", "b")
    assert ds.column("a").tolist() == [0.0, 1.0, 2.0]
    assert ds.column("b").tolist() == [0.0, 10.0, 20.0]
    assert not ds.features.flags.writeable


def test_dataset_reports_non_finite_cell_position():
    with pytest.raises(DatasetError, match="row 2, column 'b'") as exc_info:
        dsm.from_arrays([[1.0, 2.0], [3.0, np.nan]], [0.0, 0.0], ["a", "b"])

    assert exc_info.value.row == 2
    assert exc_info.value.column == "b"


def test_dataset_rejects_bad_names():
    with pytest.raises(DatasetError, match="Invalid column name"):
        dsm.from_arrays([[1.0]], [0.0], ["x-1"])
    with pytest.raises(DatasetError, match="already in use"):
        dsm.from_arrays([[1.0]], [0.0], ["y"], target_name="y")


def test_load_csv_excludes_target_and_sorts_features(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("z,y,a\n1.5,10,2\n-3,20,4e-1\n", encoding="utf-8")

    ds = dsm.load_csv(path, "y")

    assert ds.feature_names == ("a", "z")
    assert ds.target_name == "y"
    assert ds.features.tolist() == [[2.0, 1.5], [0.4, -3.0]]
    assert ds.target.tolist() == [10.0, 20.0]


@pytest.mark.parametrize("body, message, row, column", [
    ("1,2\n,3\n", "Empty cell", 2, "a"),
    ("1,2\n3,abc\n", "Non-numeric cell", 2, "y"),
    ("inf,2\n", "Non-finite value", 1, "a"),
])
def test_load_csv_reports_bad_cells(tmp_path, body, message, row, column):
    path = tmp_path / "bad.csv"
    path.write_text("a,y\n" + body, encoding="utf-8")

    with pytest.raises(DatasetError, match=message) as exc_info:
        dsm.load_csv(path, "y")

    assert (exc_info.value.row, exc_info.value.column) == (row, column)


def test_load_csv_header_problems(tmp_path):
    duplicated = tmp_path / "dup.csv"
    duplicated.write_text("a,a,y\n1,2,3\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="Duplicate"):
        dsm.load_csv(duplicated, "y")

    no_target = tmp_path / "no_target.csv"
    no_target.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="Target column 'y' not found"):
        dsm.load_csv(no_target, "y")

    with pytest.raises(FileNotFoundError):
        dsm.load_csv(tmp_path / "missing.csv", "y")


def test_load_csv_strips_padded_header_names(tmp_path):
    padded = tmp_path / "padded.csv"
    padded.write_text("a, b,y\n1,2,3\n4,5,6\n", encoding="utf-8")

    ds = dsm.load_csv(padded, "y")

    assert ds.feature_names == ("a", "b")
    assert ds.column("b").tolist() == [2.0, 5.0]
    assert ds.target.tolist() == [3.0, 6.0]


def test_write_csv_then_load_gives_identical_values(tmp_path):
    ds = dsm.from_arrays([[0.1, 1 / 3], [1e-12, -2.5]], [0.30000000000000004, 7.0], ["p", "q"])

    path = dsm.write_csv(ds, tmp_path / "round")
    reloaded = dsm.load_csv(path, "y")

    assert path.endswith("round.csv")
    assert reloaded.feature_names == ds.feature_names
    assert np.array_equal(reloaded.features, ds.features)
    assert np.array_equal(reloaded.target, ds.target)


def test_split_chronological_sizes_and_bounds():
    ds = _toy_dataset(10)

    split = dsm.split_chronological(ds, 6, 3)
    assert split.train.tolist() == [0, 1, 2, 3, 4, 5]
    assert split.val.tolist() == [6, 7, 8]
    assert split.test.tolist() == [9]

    with pytest.raises(ValueError, match="exceeds the number of rows"):
        dsm.split_chronological(ds, 8, 3)


def test_split_random_floors_val_and_test():
    ds = _toy_dataset(7)

    split = dsm.split_random(ds, (0.5, 0.25, 0.25), seed=3)

    assert split.sizes == (5, 1, 1)
    combined = np.concatenate([split.train, split.val, split.test])
    assert sorted(combined.tolist()) == list(range(7))
    assert split.train.tolist() == sorted(split.train.tolist())
    again = dsm.split_random(ds, (0.5, 0.25, 0.25), seed=3)
    assert again.train.tolist() == split.train.tolist()


def test_split_random_rejects_bad_fractions():
    ds = _toy_dataset(10)
    with pytest.raises(ValueError, match="summing to 1"):
        dsm.split_random(ds, (0.5, 0.5, 0.5), seed=0)
    with pytest.raises(ValueError, match="empty split"):
        dsm.split_random(_toy_dataset(3), (0.8, 0.1, 0.1), seed=0)


def test_split_views_returns_none_for_an_empty_test_set():
    ds = _toy_dataset(10)

    train, val, test = dsm.split_views(ds, dsm.split_chronological(ds, 7, 3))

    assert (train.n_rows, val.n_rows) == (7, 3)
    assert test is None


def test_add_lag_feature_drops_leading_rows():
    ds = dsm.from_arrays([[1.0], [2.0], [3.0], [4.0]], [10.0, 20.0, 30.0, 40.0], ["x"])

    lagged = dsm.add_lag_feature(ds, "y", 1, "y_lag1")

    assert lagged.feature_names == ("x", "y_lag1")
    assert lagged.column("x").tolist() == [2.0, 3.0, 4.0]
    assert lagged.column("y_lag1").tolist() == [10.0, 20.0, 30.0]
    assert lagged.target.tolist() == [20.0, 30.0, 40.0]

    with pytest.raises(ValueError, match="smaller than the number of rows"):
        dsm.add_lag_feature(ds, "x", 4, "x_lag4")
    with pytest.raises(KeyError):
        dsm.add_lag_feature(ds, "nope", 1, "nope_lag1")


def test_permute_column_is_seeded_and_keeps_values():
    ds = _toy_dataset(20)

    first = dsm.permute_column(ds, "a", 5, "a_perm")
    second = dsm.permute_column(ds, "a", 5, "a_perm")

    assert first.feature_names == ("a", "a_perm", "b")
    assert sorted(first.column("a_perm").tolist()) == ds.column("a").tolist()
    assert first.column("a_perm").tolist() == second.column("a_perm").tolist()
    assert first.column("a").tolist() == ds.column("a").tolist()


def test_select_features():
    ds = _toy_dataset(4)

    assert dsm.select_features(ds, [["b"], "a"]).feature_names == ("a", "b")
    assert dsm.select_features(ds, "b").feature_names == ("b",)
    with pytest.raises(KeyError, match="Unknown column"):
        dsm.select_features(ds, ["c"])


def test_concat_rows_requires_matching_columns():
    ds = _toy_dataset(4)

    stacked = dsm.concat_rows(ds, ds)
    assert stacked.n_rows == 8

    with pytest.raises(DatasetError, match="different columns"):
        dsm.concat_rows(ds, dsm.select_features(ds, "b"))
