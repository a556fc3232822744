#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Shapley attribution for the boosted tree ensembles of 'shapshift.models'.

Three estimators of the same quantity are provided:

- 'tree_shap': exact path-dependent attribution in polynomial time,
  vectorised over the explained rows.
- 'exact_shapley': brute-force enumeration of every coalition, used as a
  reference on small feature counts.
- 'sampling_shapley': Monte Carlo average of marginal contributions over
  random feature orderings.

The coalition value v(S) is either the cover-weighted conditional
expectation of the trees ("tree_conditional", the game 'tree_shap' solves)
or the mean prediction over a background set with the features in S
replaced by the explained row ("background_interventional").
"""

#----------------#
# Import modules #
#----------------#

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.file_io import write_text_atomic
from shapshift.general.validation_utils import check_choice, check_int
from shapshift.models.gbdt import (
    GbdtModel,
    RegressionTree,
    as_feature_matrix,
    predict,
    validate_tree
)

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class ShapMatrix:
    """
    Per-row, per-feature attributions.

    For every row r: base_value + values[r].sum() equals the model
    prediction for r (up to floating-point error).
    """
    values: np.ndarray
    base_value: float
    feature_names: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(self.feature_names):
            raise ValueError(format_string(SHAP_SHAPE_ERROR_TEMPLATE,
                                           (values.shape, len(self.feature_names))))
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "base_value", float(self.base_value))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def explained_rows(self) -> int:
        return self.values.shape[0]

    def predictions(self) -> np.ndarray:
        """Model output reconstructed from the attributions."""
        return self.base_value + self.values.sum(axis=1)


@dataclass(frozen=True)
class CoalitionValueSpec:
    """How v(S) treats the features outside S."""
    mode: str = "tree_conditional"
    background: np.ndarray | None = None

    def __post_init__(self):
        check_choice(self.mode, "mode", COALITION_MODES)
        if self.mode == "background_interventional":
            if self.background is None or len(self.background) == 0:
                raise ValueError(EMPTY_BACKGROUND_ERROR)

#------------------#
# Define functions #
#------------------#

# Path bookkeeping #
#------------------#

# A path holds, for every distinct feature met on the way from the root,
# its feature index, the share of training cover that follows the path
# ("zero" fraction, shared by all rows) and whether each row follows it
# ("one" fraction, one value per row). 'weights' has shape
# (path length, n_rows) and stores the permutation weights of every
# subset size.

def _extend(features, zero, one, weights, zero_fraction, one_fraction, feature):
    depth = len(features)
    features = features + [feature]
    zero = zero + [zero_fraction]
    one = one + [one_fraction]
    if depth == 0:
        return features, zero, one, np.ones((1, len(one_fraction)))

    old = np.vstack([weights, np.zeros((1, weights.shape[1]))])
    k = np.arange(depth + 1, dtype=np.float64)[:, None]
    new = zero_fraction * (depth - k) / (depth + 1) * old
    new[1:] += one_fraction * k[1:] / (depth + 1) * old[:-1]
    return features, zero, one, new


def _unwind(features, zero, one, weights, path_index):
    depth = len(features) - 1
    one_fraction = one[path_index]
    zero_fraction = zero[path_index]
    has_one = one_fraction != 0
    safe_one = np.where(has_one, one_fraction, 1.0)

    new = weights[:depth].copy()
    next_one_portion = weights[depth]
    for i in range(depth - 1, -1, -1):
        unwound = next_one_portion * (depth + 1) / ((i + 1) * safe_one)
        next_one_portion = weights[i] - unwound * zero_fraction * (depth - i) / (depth + 1)
        new[i] = np.where(has_one,
                          unwound,
                          weights[i] * (depth + 1) / (zero_fraction * (depth - i)))

    keep = [i for i in range(depth + 1) if i != path_index]
    return ([features[i] for i in keep],
            [zero[i] for i in keep],
            [one[i] for i in keep],
            new)


def _unwound_sum(zero, one, weights, path_index):
    """Total permutation weight the path would have without 'path_index'."""
    depth = len(zero) - 1
    one_fraction = one[path_index]
    zero_fraction = zero[path_index]
    has_one = one_fraction != 0
    safe_one = np.where(has_one, one_fraction, 1.0)

    total_one = np.zeros(weights.shape[1])
    total_zero = np.zeros(weights.shape[1])
    next_one_portion = weights[depth]
    for i in range(depth - 1, -1, -1):
        unwound = next_one_portion * (depth + 1) / ((i + 1) * safe_one)
        total_one += unwound
        next_one_portion = weights[i] - unwound * zero_fraction * (depth - i) / (depth + 1)
        total_zero += weights[i] * (depth + 1) / (zero_fraction * (depth - i))
    return np.where(has_one, total_one, total_zero)


def _tree_shap_recurse(tree, matrix, phi, node,
                       features, zero, one, weights,
                       zero_fraction, one_fraction, feature):
    features, zero, one, weights = _extend(features, zero, one, weights,
                                           zero_fraction, one_fraction, feature)

    if tree.feature[node] < 0:
        leaf_value = tree.value[node]
        for i in range(1, len(features)):
            scale = _unwound_sum(zero, one, weights, i)
            phi[:, features[i]] += scale * (one[i] - zero[i]) * leaf_value
        return

    split_feature = int(tree.feature[node])
    go_left = matrix[:, split_feature] < tree.threshold[node]

    incoming_zero = 1.0
    incoming_one = np.ones(len(matrix))
    if split_feature in features:
        # the feature was already split on higher up: merge both conditions
        path_index = features.index(split_feature)
        incoming_zero = zero[path_index]
        incoming_one = one[path_index]
        features, zero, one, weights = _unwind(features, zero, one, weights, path_index)

    cover = tree.cover[node]
    for child, follows in ((tree.left[node], go_left), (tree.right[node], ~go_left)):
        _tree_shap_recurse(tree, matrix, phi, child,
                           features, zero, one, weights,
                           incoming_zero * tree.cover[child] / cover,
                           incoming_one * follows,
                           split_feature)


def expected_tree_value(tree: RegressionTree) -> float:
    """Cover-weighted mean of the leaf values."""
    leaves = tree.feature < 0
    return float((tree.cover[leaves] * tree.value[leaves]).sum() / tree.cover[0])


def expected_value(model: GbdtModel) -> float:
    """base_score + learning_rate * sum of per-tree expected values."""
    return model.base_score + model.learning_rate * sum(expected_tree_value(tree)
                                                        for tree in model.trees)


# Tree attribution #
#------------------#

def tree_shap(model: GbdtModel, rows) -> ShapMatrix:
    """
    Exact path-dependent Shapley values of a tree ensemble.

    Each tree is walked once for all rows at the same time; the unique
    feature path is extended and unwound with per-row "one" fractions, so
    the cost is O(trees x leaves x depth^2) vector operations over rows.

    Parameters
    ----------
    model : GbdtModel
    rows : numpy.ndarray | pandas.DataFrame | Dataset
        Rows to explain, aligned with 'model.feature_names'.

    Returns
    -------
    ShapMatrix
        values[r, j] is the attribution of feature j for row r, scaled by
        the learning rate and summed over trees. Features that no tree
        splits on get exactly 0. base_value is 'expected_value(model)'.

    Raises
    ------
    ModelFormatError
        If a tree violates the cover invariant.
    ValueError
        On a width mismatch.
    """
    matrix = as_feature_matrix(model, rows)
    phi = np.zeros((len(matrix), model.n_features))

    for tree_idx, tree in enumerate(model.trees):
        validate_tree(tree, model.n_features, tree_idx)
        if tree.n_nodes == 1 or len(matrix) == 0:
            continue
        tree_phi = np.zeros_like(phi)
        _tree_shap_recurse(tree, matrix, tree_phi, 0,
                           [], [], [], None,
                           1.0, np.ones(len(matrix)), -1)
        phi += model.learning_rate * tree_phi

    return ShapMatrix(values=phi,
                      base_value=expected_value(model),
                      feature_names=model.feature_names)


# Coalition values #
#------------------#

def _conditional_tree_values(tree: RegressionTree, row: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """
    Cover-weighted expectation of one tree for every coalition in 'masks'.
    Splits on features in the coalition follow 'row'; the others average
    both children by cover.
    """
    values = np.zeros((tree.n_nodes, len(masks)))
    # children have larger ids, so a reverse sweep sees them first
    for node in range(tree.n_nodes - 1, -1, -1):
        feature = tree.feature[node]
        if feature < 0:
            values[node] = tree.value[node]
            continue
        left, right = tree.left[node], tree.right[node]
        hot = left if row[feature] < tree.threshold[node] else right
        in_coalition = ((masks >> feature) & 1).astype(bool)
        averaged = (tree.cover[left] * values[left]
                    + tree.cover[right] * values[right]) / tree.cover[node]
        values[node] = np.where(in_coalition, values[hot], averaged)
    return values[0]


def coalition_values(model: GbdtModel,
                     row: np.ndarray,
                     masks: np.ndarray,
                     spec: CoalitionValueSpec) -> np.ndarray:
    """
    v(S) for every coalition S encoded as a bit mask (bit j set when
    feature j belongs to S).
    """
    masks = np.asarray(masks, dtype=np.int64)
    if spec.mode == "tree_conditional":
        total = np.zeros(len(masks))
        for tree in model.trees:
            total += _conditional_tree_values(tree, row, masks)
        return model.base_score + model.learning_rate * total

    background = as_feature_matrix(model, spec.background)
    n_background = len(background)
    bits = np.int64(1) << np.arange(model.n_features, dtype=np.int64)
    chunk = max(1, INTERVENTIONAL_BATCH_ROWS // n_background)
    result = np.empty(len(masks))
    for start in range(0, len(masks), chunk):
        batch = masks[start:start + chunk]
        in_coalition = (batch[:, None] & bits[None, :]) != 0
        hybrid = np.where(in_coalition[:, None, :], row[None, None, :], background[None, :, :])
        predictions = predict(model, hybrid.reshape(-1, model.n_features))
        result[start:start + chunk] = predictions.reshape(len(batch), n_background).mean(axis=1)
    return result


def _as_single_row(model: GbdtModel, row) -> np.ndarray:
    matrix = as_feature_matrix(model, row)
    if len(matrix) != 1:
        raise ValueError(format_string(SINGLE_ROW_ERROR_TEMPLATE, (len(matrix),)))
    return matrix[0]


# Reference estimators #
#----------------------#

def exact_shapley(model: GbdtModel,
                  row,
                  spec: CoalitionValueSpec | None = None) -> np.ndarray:
    """
    Shapley values by enumerating all 2^m coalitions.

    phi_i = sum over S not containing i of
            |S|! (m - |S| - 1)! / m! * (v(S + i) - v(S))

    Raises
    ------
    ValueError
        If the model has more than 15 features.
    """
    spec = CoalitionValueSpec() if spec is None else spec
    n_features = model.n_features
    if n_features > EXACT_MAX_FEATURES:
        raise ValueError(format_string(TOO_MANY_FEATURES_ERROR_TEMPLATE,
                                       (n_features, EXACT_MAX_FEATURES)))
    row = _as_single_row(model, row)
    if n_features == 0:
        return np.zeros(0)

    masks = np.arange(1 << n_features, dtype=np.int64)
    values = coalition_values(model, row, masks, spec)
    sizes = np.bitwise_count(masks).astype(np.int64)
    weights = np.array([math.factorial(s) * math.factorial(n_features - s - 1)
                        / math.factorial(n_features) if s < n_features else 0.0
                        for s in range(n_features + 1)])

    phi = np.zeros(n_features)
    for feature in range(n_features):
        bit = np.int64(1) << feature
        without = masks[(masks & bit) == 0]
        phi[feature] = (weights[sizes[without]] * (values[without | bit] - values[without])).sum()
    return phi


def sampling_shapley(model: GbdtModel,
                     row,
                     spec: CoalitionValueSpec | None = None,
                     n_permutations: int = 1000,
                     seed: int = 0,
                     return_stderr: bool = False):
    """
    Permutation-sampling estimate of the Shapley values.

    Each feature's value is the mean, over 'n_permutations' seeded uniform
    random orderings, of v(predecessors + i) - v(predecessors).

    Parameters
    ----------
    model : GbdtModel
    row : array-like
        The single row to explain.
    spec : CoalitionValueSpec, optional
        Defaults to the tree-conditional game.
    n_permutations : int
        At least 1.
    seed : int
    return_stderr : bool, optional
        Also return the standard error of each estimate (NaN when only
        one permutation is drawn).

    Returns
    -------
    numpy.ndarray | tuple[numpy.ndarray, numpy.ndarray]
    """
    spec = CoalitionValueSpec() if spec is None else spec
    n_permutations = check_int(n_permutations, "n_permutations", minimum=1)
    seed = check_int(seed, "seed")
    n_features = model.n_features
    if n_features > SAMPLING_MAX_FEATURES:
        raise ValueError(format_string(TOO_MANY_FEATURES_ERROR_TEMPLATE,
                                       (n_features, SAMPLING_MAX_FEATURES)))
    row = _as_single_row(model, row)
    if n_features == 0:
        empty = np.zeros(0)
        return (empty, empty.copy()) if return_stderr else empty

    rng = np.random.default_rng(seed)
    orderings = np.argsort(rng.random((n_permutations, n_features)), axis=1)
    prefix = np.zeros((n_permutations, n_features + 1), dtype=np.int64)
    prefix[:, 1:] = np.cumsum(np.int64(1) << orderings.astype(np.int64), axis=1)

    unique_masks, inverse = np.unique(prefix, return_inverse=True)
    mask_values = coalition_values(model, row, unique_masks, spec)
    prefix_values = mask_values[inverse.reshape(prefix.shape)]

    samples = np.empty((n_permutations, n_features))
    np.put_along_axis(samples, orderings, np.diff(prefix_values, axis=1), axis=1)

    phi = samples.mean(axis=0)
    if not return_stderr:
        return phi
    if n_permutations == 1:
        return phi, np.full(n_features, np.nan)
    return phi, samples.std(axis=0, ddof=1) / math.sqrt(n_permutations)


# Aggregates #
#------------#

def global_influence(shap: ShapMatrix) -> np.ndarray:
    """
    Mean absolute attribution of every feature.

    Raises
    ------
    ValueError
        If the matrix explains no rows.
    """
    if shap.explained_rows < 1:
        raise ValueError(EMPTY_SHAP_ERROR)
    return np.abs(shap.values).mean(axis=0)


def write_shap_csv(shap: ShapMatrix,
                   path: str | Path,
                   predictions,
                   row_indices=None) -> str:
    """
    Write 'row_index,<features...>,base_value,prediction', one line per
    explained row.

    Parameters
    ----------
    shap : ShapMatrix
    path : str | Path
        Destination ('.csv' appended when missing).
    predictions : array-like
        Model output for every explained row, as returned by 'predict'.
        Written unchanged so that additivity can be checked from the file.
    row_indices : array-like, optional
        Dataset row numbers, 0..n-1 by default.

    Raises
    ------
    ValueError
        If 'predictions' does not have one value per explained row.
    """
    predictions = np.asarray(predictions, dtype=np.float64).reshape(-1)
    if len(predictions) != shap.explained_rows:
        raise ValueError(format_string(PREDICTION_LENGTH_ERROR_TEMPLATE,
                                       (len(predictions), shap.explained_rows)))
    if row_indices is None:
        row_indices = range(shap.explained_rows)
    header = ",".join(["row_index", *shap.feature_names, "base_value", "prediction"])
    lines = [header]
    for row_index, values, prediction in zip(row_indices, shap.values.tolist(), predictions.tolist()):
        cells = [str(int(row_index)), *(repr(value) for value in values),
                 repr(shap.base_value), repr(prediction)]
        lines.append(",".join(cells))
    return write_text_atomic(path, "\n".join(lines) + "\n", extension="csv")

#--------------------------#
# Parameters and constants #
#--------------------------#

COALITION_MODES = ("tree_conditional", "background_interventional")

EXACT_MAX_FEATURES = 15
# bit masks live in int64
SAMPLING_MAX_FEATURES = 62
INTERVENTIONAL_BATCH_ROWS = 1 << 16

# Error strings #
#---------------#

EMPTY_BACKGROUND_ERROR = "The background-interventional mode needs a non-empty background set."
EMPTY_SHAP_ERROR = "Global influence needs at least one explained row."
SHAP_SHAPE_ERROR_TEMPLATE = "Attribution matrix of shape {} does not match {} feature names."
TOO_MANY_FEATURES_ERROR_TEMPLATE = "Model has {} features; this estimator supports at most {}."
PREDICTION_LENGTH_ERROR_TEMPLATE = "Got {} predictions for {} explained rows."
SINGLE_ROW_ERROR_TEMPLATE = "Expected a single row to explain, got {}."
