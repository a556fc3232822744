#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tabular data model shared by every other sub-package.

A Dataset holds a dense float64 feature matrix whose columns are always
sorted by name, plus the target vector. Every operation returns a new
Dataset; arrays are stored read-only.
"""

#----------------#
# Import modules #
#----------------#

import math
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.arrays_and_lists.data_manipulation import flatten_list
from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.file_io import write_text_atomic
from shapshift.general.validation_utils import check_int, check_real

#----------------#
# Define classes #
#----------------#

class DatasetError(ValueError):
    """
    Raised when tabular data cannot form a valid Dataset.

    'row' (1-based data row, header excluded) and 'column' are set when
    the problem is tied to a single cell.
    """
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class Dataset:
    """
    Immutable numeric feature matrix plus target vector.

    Attributes
    ----------
    feature_names : tuple[str, ...]
        Unique names, sorted ascending. Column j of 'features' is
        'feature_names[j]'.
    features : numpy.ndarray
        Float64 matrix of shape (n, len(feature_names)).
    target : numpy.ndarray
        Float64 vector of length n.
    target_name : str
        Name of the target column, used when writing CSV files.
    """
    feature_names: tuple
    features: np.ndarray
    target: np.ndarray
    target_name: str = "y"

    def __post_init__(self):
        names = tuple(self.feature_names)
        features = np.array(self.features, dtype=np.float64, copy=True)
        target = np.array(self.target, dtype=np.float64, copy=True).reshape(-1)

        if features.ndim == 1 and len(names) == 0:
            features = features.reshape(len(target), 0)
        if features.ndim != 2:
            raise DatasetError(format_string(MATRIX_DIM_ERROR_TEMPLATE, (features.ndim,)))

        n_rows = len(target)
        if n_rows < 1:
            raise DatasetError(EMPTY_DATASET_ERROR)
        if features.shape != (n_rows, len(names)):
            raise DatasetError(format_string(SHAPE_MISMATCH_ERROR_TEMPLATE,
                                             (features.shape, n_rows, len(names))))

        _check_names(names, self.target_name)
        if list(names) != sorted(names):
            raise DatasetError(format_string(UNSORTED_NAMES_ERROR_TEMPLATE, (list(names),)))

        if not np.isfinite(target).all():
            bad_row = int(np.flatnonzero(~np.isfinite(target))[0])
            raise DatasetError(format_string(NON_FINITE_CELL_ERROR_TEMPLATE,
                                             (bad_row + 1, self.target_name, target[bad_row])),
                               row=bad_row + 1, column=self.target_name)
        non_finite = ~np.isfinite(features)
        if non_finite.any():
            bad_row, bad_col = (int(i) for i in np.argwhere(non_finite)[0])
            raise DatasetError(format_string(NON_FINITE_CELL_ERROR_TEMPLATE,
                                             (bad_row + 1, names[bad_col],
                                              features[bad_row, bad_col])),
                               row=bad_row + 1, column=names[bad_col])

        features.flags.writeable = False
        target.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "target", target)

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def column(self, name: str) -> np.ndarray:
        """Return the values of feature 'name' (read-only view)."""
        try:
            return self.features[:, self.feature_names.index(name)]
        except ValueError:
            raise KeyError(format_string(UNKNOWN_COLUMN_ERROR_TEMPLATE,
                                         (name, list(self.feature_names))))

    def to_frame(self) -> pd.DataFrame:
        """Features followed by the target, as a pandas DataFrame."""
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame[self.target_name] = self.target
        return frame


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint, individually ascending row-index arrays."""
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for field_name in ("train", "val", "test"):
            arr = np.asarray(getattr(self, field_name), dtype=np.int64).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, field_name, arr)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

#------------------#
# Define functions #
#------------------#

# Helpers #
#---------#

def _check_names(names: tuple, target_name: str) -> None:
    seen = set()
    for name in names:
        if not isinstance(name, str) or not NAME_PATTERN.fullmatch(name):
            raise DatasetError(format_string(INVALID_NAME_ERROR_TEMPLATE, (name,)))
        if name in seen:
            raise DatasetError(format_string(DUPLICATE_NAME_ERROR_TEMPLATE, (name,)))
        seen.add(name)
    if target_name in seen:
        raise DatasetError(format_string(NAME_COLLISION_ERROR_TEMPLATE, (target_name,)))


def _ensure_new_name(ds: Dataset, new_name: str) -> None:
    if new_name in ds.feature_names or new_name == ds.target_name:
        raise DatasetError(format_string(NAME_COLLISION_ERROR_TEMPLATE, (new_name,)))
    if not NAME_PATTERN.fullmatch(new_name):
        raise DatasetError(format_string(INVALID_NAME_ERROR_TEMPLATE, (new_name,)))


def _parse_column(values: pd.Series, column: str) -> np.ndarray:
    """
    Parse a column of raw text cells into float64.

    Python's float() gives correctly rounded decimal parsing. The first
    empty, non-numeric or non-finite cell is reported with its position.
    """
    parsed = np.empty(len(values), dtype=np.float64)
    for row_idx, cell in enumerate(values.tolist()):
        text = cell.strip() if isinstance(cell, str) else ""
        if not text:
            raise DatasetError(format_string(EMPTY_CELL_ERROR_TEMPLATE, (row_idx + 1, column)),
                               row=row_idx + 1, column=column)
        try:
            number = float(text)
        except ValueError:
            raise DatasetError(format_string(NON_NUMERIC_CELL_ERROR_TEMPLATE,
                                             (row_idx + 1, column, text)),
                               row=row_idx + 1, column=column)
        if not math.isfinite(number):
            raise DatasetError(format_string(NON_FINITE_CELL_ERROR_TEMPLATE,
                                             (row_idx + 1, column, text)),
                               row=row_idx + 1, column=column)
        parsed[row_idx] = number
    return parsed


# Construction #
#--------------#

def from_arrays(features, target, feature_names, target_name: str = "y") -> Dataset:
    """
    Build a Dataset from arrays in arbitrary column order.

    Columns are reordered so that names are sorted ascending.

    Parameters
    ----------
    features : array-like, shape (n, m)
    target : array-like, shape (n,)
    feature_names : list[str]
        Names of the m columns, in the order of 'features'.
    target_name : str, optional
        Defaults to "y".
    """
    feature_names = list(flatten_list(list(feature_names)))
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 2 and features.shape[1] != len(feature_names):
        raise DatasetError(format_string(SHAPE_MISMATCH_ERROR_TEMPLATE,
                                         (features.shape, len(target), len(feature_names))))
    order = sorted(range(len(feature_names)), key=lambda j: feature_names[j])
    if features.ndim == 2:
        features = features[:, order]
    return Dataset(feature_names=tuple(feature_names[j] for j in order),
                   features=features,
                   target=target,
                   target_name=target_name)


# I/O #
#-----#

def load_csv(path: str | Path, target_column: str) -> Dataset:
    """
    Load a comma-separated file with a header row into a Dataset.

    Parameters
    ----------
    path : str | Path
        UTF-8 CSV file, '.' as decimal separator, no quoting.
    target_column : str
        Header name of the target. Every other column becomes a feature.

    Returns
    -------
    Dataset
        Features sorted by name, target excluded from the features.

    Raises
    ------
    FileNotFoundError
        If 'path' does not exist.
    DatasetError
        On empty, missing or duplicate header names, a missing target column,
        and on any empty, non-numeric or non-finite cell (row and column
        are reported).
    """
    path = str(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(format_string(FILE_NOT_FOUND_ERROR_TEMPLATE, (path,)))

    # Read the header ourselves: pandas would silently rename duplicates
    with open(path, encoding="utf-8") as file_obj:
        header_line = file_obj.readline().rstrip("\r\n")
    if not header_line:
        raise DatasetError(format_string(MISSING_HEADER_ERROR_TEMPLATE, (path,)))

    header = [name.strip() for name in header_line.split(",")]
    for col_idx, name in enumerate(header):
        if not name:
            raise DatasetError(format_string(EMPTY_HEADER_NAME_ERROR_TEMPLATE, (col_idx + 1,)))
    duplicates = sorted({name for name in header if header.count(name) > 1})
    if duplicates:
        raise DatasetError(format_string(DUPLICATE_NAME_ERROR_TEMPLATE, (duplicates,)))
    if target_column not in header:
        raise DatasetError(format_string(MISSING_TARGET_ERROR_TEMPLATE,
                                         (target_column, header)))

    try:
        raw = pd.read_csv(path,
                          index_col=False,
                          dtype=str,
                          na_filter=False,
                          keep_default_na=False,
                          skip_blank_lines=True,
                          encoding="utf-8")
    except pd.errors.ParserError as exc:
        raise DatasetError(format_string(MALFORMED_CSV_ERROR_TEMPLATE, (path, exc)))
    raw.columns = [str(name).strip() for name in raw.columns]

    if len(raw) == 0:
        raise DatasetError(EMPTY_DATASET_ERROR)

    columns = {name: _parse_column(raw[name], name) for name in header}
    feature_names = sorted(name for name in header if name != target_column)
    if feature_names:
        features = np.column_stack([columns[name] for name in feature_names])
    else:
        features = np.empty((len(raw), 0))
    return Dataset(feature_names=tuple(feature_names),
                   features=features,
                   target=columns[target_column],
                   target_name=target_column)


def write_csv(ds: Dataset, path: str | Path) -> str:
    """
    Write 'ds' as CSV: feature columns in name order, then the target.
    Numbers use the shortest decimal text that round-trips to the same
    float64.

    Returns
    -------
    str
        Path of the written file ('.csv' appended when missing).
    """
    header = ",".join(list(ds.feature_names) + [ds.target_name])
    matrix = np.column_stack([ds.features, ds.target]).tolist()
    body = "\n".join(",".join(repr(value) for value in row) for row in matrix)
    return write_text_atomic(path, f"{header}\n{body}\n", extension="csv")


# Row and column selection #
#--------------------------#

def take_rows(ds: Dataset, indices) -> Dataset:
    """Subset of rows, in the order given by 'indices'."""
    indices = np.asarray(indices, dtype=np.int64)
    return Dataset(feature_names=ds.feature_names,
                   features=ds.features[indices],
                   target=ds.target[indices],
                   target_name=ds.target_name)


def concat_rows(first: Dataset, second: Dataset) -> Dataset:
    """Stack two datasets with identical columns, 'first' on top."""
    if first.feature_names != second.feature_names:
        raise DatasetError(format_string(COLUMN_MISMATCH_ERROR_TEMPLATE,
                                         (list(first.feature_names),
                                          list(second.feature_names))))
    return Dataset(feature_names=first.feature_names,
                   features=np.vstack([first.features, second.features]),
                   target=np.concatenate([first.target, second.target]),
                   target_name=first.target_name)


def select_features(ds: Dataset, names) -> Dataset:
    """
    Keep only the named feature columns. Names may come as a (nested)
    list in any order; the result is always name-sorted.
    """
    if isinstance(names, str):
        names = [names]
    names = sorted(set(flatten_list(list(names))))
    unknown = [name for name in names if name not in ds.feature_names]
    if unknown:
        raise KeyError(format_string(UNKNOWN_COLUMN_ERROR_TEMPLATE,
                                     (unknown, list(ds.feature_names))))
    col_idx = [ds.feature_names.index(name) for name in names]
    return Dataset(feature_names=tuple(names),
                   features=ds.features[:, col_idx],
                   target=ds.target,
                   target_name=ds.target_name)


def with_column(ds: Dataset, name: str, values) -> Dataset:
    """Return a copy of 'ds' with an extra feature column, re-sorted."""
    _ensure_new_name(ds, name)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(values) != ds.n_rows:
        raise DatasetError(format_string(LENGTH_MISMATCH_ERROR_TEMPLATE,
                                         (name, len(values), ds.n_rows)))
    return from_arrays(np.column_stack([ds.features, values]),
                       ds.target,
                       list(ds.feature_names) + [name],
                       target_name=ds.target_name)


# Splits #
#--------#

def split_chronological(ds: Dataset, n_train: int, n_val: int) -> SplitIndices:
    """
    Temporal split: the first 'n_train' rows train, the next 'n_val'
    validate, and whatever remains is the test set (possibly empty).

    Raises
    ------
    ValueError
        If a count is below 1 or 'n_train + n_val' exceeds the row count.
    """
    n_train = check_int(n_train, "n_train", minimum=1)
    n_val = check_int(n_val, "n_val", minimum=1)
    n_rows = ds.n_rows
    if n_train + n_val > n_rows:
        raise ValueError(format_string(SPLIT_TOO_LARGE_ERROR_TEMPLATE,
                                       (n_train, n_val, n_rows)))
    return SplitIndices(train=np.arange(0, n_train),
                        val=np.arange(n_train, n_train + n_val),
                        test=np.arange(n_train + n_val, n_rows))


def check_split_fractions(fractions) -> list[float]:
    """
    Validate (train, val, test) fractions: three positive numbers summing
    to 1. Returns them as a flat list of floats.
    """
    fractions = [check_real(f, "fractions", low=0.0, low_inclusive=False)
                 for f in flatten_list(list(fractions))]
    if len(fractions) != 3 or not math.isclose(sum(fractions), 1.0, abs_tol=FRACTION_SUM_TOL):
        raise ValueError(format_string(FRACTIONS_ERROR_TEMPLATE, (fractions,)))
    return fractions


def split_random(ds: Dataset, fractions, seed: int) -> SplitIndices:
    """
    Seeded random split.

    Validation and test receive floor(n * fraction) rows each and the
    remainder goes to train. Each index set is returned in ascending
    (original) row order.

    Parameters
    ----------
    ds : Dataset
    fractions : sequence of three floats
        (train, val, test) fractions, all positive, summing to 1.
    seed : int

    Raises
    ------
    ValueError
        If the fractions are not three positive numbers summing to 1, or if
        any resulting split would be empty.
    """
    fractions = check_split_fractions(fractions)
    seed = check_int(seed, "seed")

    n_rows = ds.n_rows
    n_val = math.floor(n_rows * fractions[1] + FLOOR_TOL)
    n_test = math.floor(n_rows * fractions[2] + FLOOR_TOL)
    n_train = n_rows - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(format_string(EMPTY_SPLIT_ERROR_TEMPLATE,
                                       (fractions, n_rows, (n_train, n_val, n_test))))

    perm = np.random.default_rng(seed).permutation(n_rows)
    return SplitIndices(train=np.sort(perm[:n_train]),
                        val=np.sort(perm[n_train:n_train + n_val]),
                        test=np.sort(perm[n_train + n_val:]))


def split_views(ds: Dataset, split: SplitIndices) -> tuple[Dataset, Dataset, Dataset]:
    """
    Materialise a split as (train, val, test) datasets. test is None
    when the split leaves no test rows.
    """
    test = take_rows(ds, split.test) if len(split.test) else None
    return take_rows(ds, split.train), take_rows(ds, split.val), test


# Derived columns #
#-----------------#

def add_lag_feature(ds: Dataset, source: str, lag: int, new_name: str) -> Dataset:
    """
    Add a lagged copy of a feature or of the target.

    Row i of the new column holds 'source' at row i - lag. The first
    'lag' rows have no predecessor and are dropped from every column and
    from the target, so the result has n - lag rows.

    Parameters
    ----------
    ds : Dataset
    source : str
        A feature name, or the dataset's target name.
    lag : int
        Positive shift, strictly smaller than the row count.
    new_name : str
        Name of the new column; must not collide with existing names.

    Raises
    ------
    KeyError
        If 'source' is neither a feature nor the target.
    DatasetError
        On a name collision.
    ValueError
        If 'lag' is not in [1, n).
    """
    lag = check_int(lag, "lag", minimum=1)
    if lag >= ds.n_rows:
        raise ValueError(format_string(LAG_TOO_LARGE_ERROR_TEMPLATE, (lag, ds.n_rows)))
    _ensure_new_name(ds, new_name)

    source_values = ds.target if source == ds.target_name else ds.column(source)
    lagged = source_values[:-lag]
    kept = take_rows(ds, np.arange(lag, ds.n_rows))
    return with_column(kept, new_name, lagged)


def permute_column(ds: Dataset, name: str, seed: int, new_name: str) -> Dataset:
    """
    Append a seeded uniform random permutation of column 'name' as
    'new_name'. The source column is left untouched.

    Examples
    --------
    >>> ds = from_arrays([[1.0], [2.0], [3.0]], [0.0, 0.0, 0.0], ["a"])
    >>> sorted(permute_column(ds, "a", 3, "a_perm").column("a_perm"))
    [1.0, 2.0, 3.0]
    """
    values = ds.column(name)
    seed = check_int(seed, "seed")
    shuffled = np.random.default_rng(seed).permutation(values)
    return with_column(ds, new_name, shuffled)

#--------------------------#
# Parameters and constants #
#--------------------------#

NAME_PATTERN = re.compile(r"[A-Za-z0-9_]+")

FRACTION_SUM_TOL = 1e-9
# Absorbs representation error such as 100 * 0.29 = 28.999999999999996
FLOOR_TOL = 1e-9

# Error strings #
#---------------#

FILE_NOT_FOUND_ERROR_TEMPLATE = "File not found: '{}'"
MISSING_HEADER_ERROR_TEMPLATE = "File '{}' has no header row."
EMPTY_HEADER_NAME_ERROR_TEMPLATE = "Header column {} has an empty name."
MISSING_TARGET_ERROR_TEMPLATE = "Target column '{}' not found in header {}."
MALFORMED_CSV_ERROR_TEMPLATE = "Could not parse '{}': {}"
EMPTY_DATASET_ERROR = "A dataset needs at least one row."
EMPTY_CELL_ERROR_TEMPLATE = "Empty cell at row {}, column '{}'."
NON_NUMERIC_CELL_ERROR_TEMPLATE = "Non-numeric cell at row {}, column '{}': '{}'."
NON_FINITE_CELL_ERROR_TEMPLATE = "Non-finite value at row {}, column '{}': '{}'."
DUPLICATE_NAME_ERROR_TEMPLATE = "Duplicate column name(s): {}"
INVALID_NAME_ERROR_TEMPLATE = "Invalid column name '{}'. Names must match [A-Za-z0-9_]+."
NAME_COLLISION_ERROR_TEMPLATE = "Column name '{}' is already in use."
UNSORTED_NAMES_ERROR_TEMPLATE = "Feature names must be sorted ascending, got {}."
UNKNOWN_COLUMN_ERROR_TEMPLATE = "Unknown column(s) {}. Available: {}"
COLUMN_MISMATCH_ERROR_TEMPLATE = "Datasets have different columns: {} vs {}"
LENGTH_MISMATCH_ERROR_TEMPLATE = "Column '{}' has {} values, dataset has {} rows."
MATRIX_DIM_ERROR_TEMPLATE = "Feature matrix must be 2-D, got {} dimension(s)."
SHAPE_MISMATCH_ERROR_TEMPLATE = "Feature matrix shape {} does not match {} rows x {} names."
SPLIT_TOO_LARGE_ERROR_TEMPLATE = "n_train ({}) + n_val ({}) exceeds the number of rows ({})."
FRACTIONS_ERROR_TEMPLATE = "Expected three positive fractions summing to 1, got {}."
EMPTY_SPLIT_ERROR_TEMPLATE = "Fractions {} on {} rows give an empty split (sizes {})."
LAG_TOO_LARGE_ERROR_TEMPLATE = "Lag {} must be smaller than the number of rows ({})."
