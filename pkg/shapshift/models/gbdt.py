#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Least-squares gradient-boosted regression trees.

Fitting is deterministic: the same data and parameters give the same
trees node for node. Split search is exact (every midpoint between
consecutive distinct values of every feature) and grows each tree one
depth level at a time, scanning all frontier nodes of a level in a single
sorted pass per feature.
"""

#----------------#
# Import modules #
#----------------#

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.dataset import Dataset
from shapshift.general.validation_utils import check_int, check_real

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

class ModelFormatError(ValueError):
    """Raised when a tree or a serialized model breaks a structural invariant."""


@dataclass(frozen=True)
class GbdtParams:
    """
    Boosting hyperparameters.

    'subsample' < 1 draws that fraction of rows (without replacement) for
    each tree using seed 'seed + t'; with the default 1.0 the fit does not
    depend on 'seed' at all.
    """
    n_trees: int = 250
    learning_rate: float = 0.1
    max_depth: int = 6
    min_samples_leaf: int = 20
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        check_int(self.n_trees, "n_trees", minimum=0)
        check_real(self.learning_rate, "learning_rate", low=0.0, high=1.0, low_inclusive=False)
        check_int(self.max_depth, "max_depth", minimum=1)
        check_int(self.min_samples_leaf, "min_samples_leaf", minimum=1)
        check_real(self.subsample, "subsample", low=0.0, high=1.0, low_inclusive=False)
        check_int(self.seed, "seed")

    def with_seed(self, seed: int) -> "GbdtParams":
        return GbdtParams(n_trees=self.n_trees,
                          learning_rate=self.learning_rate,
                          max_depth=self.max_depth,
                          min_samples_leaf=self.min_samples_leaf,
                          subsample=self.subsample,
                          seed=seed)


@dataclass(frozen=True)
class TreeNode:
    """
    One node of a regression tree.

    Internal nodes have 'feature_index' >= 0 and two child ids; leaves have
    'feature_index' == -1 and children -1. 'value' is the mean residual of
    the training rows routed through the node (the prediction for leaves).
    """
    node_id: int
    feature_index: int
    threshold: float
    left: int
    right: int
    cover: int
    value: float

    @property
    def is_leaf(self) -> bool:
        return self.feature_index < 0


@dataclass(frozen=True)
class RegressionTree:
    """
    Binary regression tree stored as parallel arrays indexed by node id.
    Node 0 is the root and every child id is larger than its parent's.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cover: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name, dtype in TREE_ARRAY_DTYPES.items():
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def node(self, node_id: int) -> TreeNode:
        return TreeNode(node_id=node_id,
                        feature_index=int(self.feature[node_id]),
                        threshold=float(self.threshold[node_id]),
                        left=int(self.left[node_id]),
                        right=int(self.right[node_id]),
                        cover=int(self.cover[node_id]),
                        value=float(self.value[node_id]))

    def nodes(self) -> list[TreeNode]:
        return [self.node(node_id) for node_id in range(self.n_nodes)]

    @classmethod
    def from_nodes(cls, nodes: list[TreeNode]) -> "RegressionTree":
        """Build a tree from nodes listed in id order (ids 0..k-1)."""
        for position, node in enumerate(nodes):
            if node.node_id != position:
                raise ModelFormatError(format_string(NODE_ORDER_ERROR_TEMPLATE,
                                                     (position, node.node_id)))
        return cls(feature=[node.feature_index for node in nodes],
                   threshold=[node.threshold for node in nodes],
                   left=[node.left for node in nodes],
                   right=[node.right for node in nodes],
                   cover=[node.cover for node in nodes],
                   value=[node.value for node in nodes])


@dataclass(frozen=True)
class GbdtModel:
    """
    Additive tree ensemble:
    prediction(x) = base_score + learning_rate * sum_t tree_t(x).
    """
    base_score: float
    trees: tuple
    learning_rate: float
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "base_score", float(self.base_score))
        object.__setattr__(self, "learning_rate", float(self.learning_rate))
        if not np.isfinite(self.base_score):
            raise ModelFormatError(format_string(NON_FINITE_BASE_ERROR_TEMPLATE,
                                                 (self.base_score,)))
        if not 0.0 < self.learning_rate <= 1.0:
            raise ModelFormatError(format_string(LEARNING_RATE_ERROR_TEMPLATE,
                                                 (self.learning_rate,)))
        for tree_idx, tree in enumerate(self.trees):
            validate_tree(tree, len(self.feature_names), tree_idx)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def used_features(self) -> list[str]:
        """Names of the features appearing in at least one split."""
        used = set()
        for tree in self.trees:
            used.update(int(f) for f in tree.feature[tree.feature >= 0])
        return [self.feature_names[j] for j in sorted(used)]

#------------------#
# Define functions #
#------------------#

# Tree invariants #
#-----------------#

def validate_tree(tree: RegressionTree, n_features: int, tree_idx: int = 0) -> None:
    """
    Check the structural invariants of a tree.

    Raises
    ------
    ModelFormatError
        If the arrays disagree in length, a child id does not point forward,
        a node has more than one parent, a leaf value or threshold is not
        finite, a feature index is out of range, or a parent's cover differs
        from the sum of its children's covers.
    """
    n_nodes = tree.n_nodes
    lengths = {len(getattr(tree, name)) for name in TREE_ARRAY_DTYPES}
    if n_nodes < 1 or len(lengths) != 1:
        raise ModelFormatError(format_string(TREE_ARRAYS_ERROR_TEMPLATE, (tree_idx,)))

    n_parents = np.zeros(n_nodes, dtype=np.int64)
    for node in range(n_nodes):
        feature = tree.feature[node]
        left, right = tree.left[node], tree.right[node]
        if tree.cover[node] < 1:
            raise ModelFormatError(format_string(NODE_COVER_ERROR_TEMPLATE,
                                                 (tree_idx, node, tree.cover[node])))
        if feature < 0:
            if left != -1 or right != -1:
                raise ModelFormatError(format_string(LEAF_CHILDREN_ERROR_TEMPLATE,
                                                     (tree_idx, node)))
            if not np.isfinite(tree.value[node]):
                raise ModelFormatError(format_string(NON_FINITE_LEAF_ERROR_TEMPLATE,
                                                     (tree_idx, node)))
            continue

        if feature >= n_features:
            raise ModelFormatError(format_string(FEATURE_INDEX_ERROR_TEMPLATE,
                                                 (tree_idx, node, feature, n_features)))
        if not np.isfinite(tree.threshold[node]):
            raise ModelFormatError(format_string(NON_FINITE_THRESHOLD_ERROR_TEMPLATE,
                                                 (tree_idx, node)))
        if not (node < left < n_nodes and node < right < n_nodes) or left == right:
            raise ModelFormatError(format_string(CHILD_ID_ERROR_TEMPLATE,
                                                 (tree_idx, node, left, right)))
        n_parents[left] += 1
        n_parents[right] += 1
        if tree.cover[node] != tree.cover[left] + tree.cover[right]:
            raise ModelFormatError(format_string(COVER_SUM_ERROR_TEMPLATE,
                                                 (tree_idx, node, tree.cover[node],
                                                  tree.cover[left], tree.cover[right])))

    if n_parents[0] != 0 or (n_parents[1:] != 1).any():
        raise ModelFormatError(format_string(TREE_SHAPE_ERROR_TEMPLATE, (tree_idx,)))


# Input handling #
#----------------#

def as_feature_matrix(model: GbdtModel, rows) -> np.ndarray:
    """
    Turn 'rows' into a float64 matrix whose columns follow
    'model.feature_names'.

    Datasets and DataFrames are aligned by column name; plain arrays must
    already have the model's width. A 1-D array is treated as one row.
    """
    if isinstance(rows, Dataset):
        rows = pd.DataFrame(rows.features, columns=list(rows.feature_names))
    if isinstance(rows, pd.DataFrame):
        missing = [name for name in model.feature_names if name not in rows.columns]
        if missing:
            raise KeyError(format_string(MISSING_FEATURES_ERROR_TEMPLATE, (missing,)))
        rows = rows.loc[:, list(model.feature_names)].to_numpy(dtype=np.float64)

    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    if matrix.ndim != 2 or matrix.shape[1] != model.n_features:
        raise ValueError(format_string(WIDTH_MISMATCH_ERROR_TEMPLATE,
                                       (matrix.shape, model.n_features)))
    return matrix


# Prediction #
#------------#

def apply_tree(tree: RegressionTree, matrix: np.ndarray) -> np.ndarray:
    """
    Leaf id reached by every row. At an internal node a row goes left iff
    its value is strictly below the threshold (ties go right).
    """
    node_ids = np.zeros(len(matrix), dtype=np.int64)
    active = np.flatnonzero(tree.feature[node_ids] >= 0)
    while active.size:
        current = node_ids[active]
        go_left = matrix[active, tree.feature[current]] < tree.threshold[current]
        node_ids[active] = np.where(go_left, tree.left[current], tree.right[current])
        active = active[tree.feature[node_ids[active]] >= 0]
    return node_ids


def predict_tree(tree: RegressionTree, matrix: np.ndarray) -> np.ndarray:
    """Raw (unscaled) output of a single tree."""
    return tree.value[apply_tree(tree, matrix)]


def predict(model: GbdtModel, rows) -> np.ndarray:
    """
    Ensemble prediction for every row.

    Parameters
    ----------
    model : GbdtModel
    rows : numpy.ndarray | pandas.DataFrame | Dataset
        Arrays must have exactly 'model.n_features' columns in model order;
        named inputs are aligned by column name.

    Returns
    -------
    numpy.ndarray
        base_score + learning_rate * sum of per-tree outputs.

    Raises
    ------
    ValueError
        On a width mismatch.
    """
    matrix = as_feature_matrix(model, rows)
    prediction = np.full(len(matrix), model.base_score, dtype=np.float64)
    for tree in model.trees:
        prediction += model.learning_rate * predict_tree(tree, matrix)
    return prediction


# Fitting #
#---------#

def _best_splits(matrix: np.ndarray,
                 sorted_rows: np.ndarray,
                 residual: np.ndarray,
                 frontier_pos: np.ndarray,
                 n_frontier: int,
                 min_samples_leaf: int):
    """
    Best split of every frontier node.

    'frontier_pos[i]' is the frontier slot of row i (-1 if row i is not in a
    frontier node). Returns per slot the gain, feature and threshold of the
    best split (gain -inf when no admissible split exists). Ties keep the
    lowest feature index, then the lowest threshold.
    """
    best_gain = np.full(n_frontier, -np.inf)
    best_feature = np.full(n_frontier, -1, dtype=np.int64)
    best_threshold = np.zeros(n_frontier)

    for feature in range(matrix.shape[1]):
        rows = sorted_rows[feature]
        slots = frontier_pos[rows]
        rows = rows[slots >= 0]
        slots = slots[slots >= 0]
        # group by slot; stability keeps the ascending feature order inside each group
        regroup = np.argsort(slots, kind="stable")
        rows, slots = rows[regroup], slots[regroup]

        values = matrix[rows, feature]
        cum = np.concatenate(([0.0], np.cumsum(residual[rows])))
        counts = np.bincount(slots, minlength=n_frontier)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        ends = starts + counts

        position = np.arange(len(rows))
        n_left = position - starts[slots] + 1
        n_right = counts[slots] - n_left
        sum_left = cum[position + 1] - cum[starts[slots]]
        sum_total = cum[ends[slots]] - cum[starts[slots]]
        sum_right = sum_total - sum_left

        next_values = np.append(values[1:], np.inf)
        admissible = ((n_left >= min_samples_leaf)
                      & (n_right >= min_samples_leaf)
                      & (values < next_values))
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = (sum_left ** 2 / n_left
                    + sum_right ** 2 / np.maximum(n_right, 1)
                    - sum_total ** 2 / counts[slots])
        gain = np.where(admissible, gain, -np.inf)

        nonempty = np.flatnonzero(counts)
        slot_max = np.full(n_frontier, -np.inf)
        slot_max[nonempty] = np.maximum.reduceat(gain, starts[nonempty])

        hits = np.flatnonzero(admissible & (gain == slot_max[slots]))
        hit_slots, first = np.unique(slots[hits], return_index=True)
        hits = hits[first]

        improves = slot_max[hit_slots] > best_gain[hit_slots]
        hit_slots, hits = hit_slots[improves], hits[improves]
        lower, upper = values[hits], next_values[hits]
        midpoint = lower + (upper - lower) / 2.0
        # keep 'lower < threshold <= upper' even when the midpoint rounds down
        midpoint = np.where(midpoint > lower, midpoint, upper)

        best_gain[hit_slots] = slot_max[hit_slots]
        best_feature[hit_slots] = feature
        best_threshold[hit_slots] = midpoint

    return best_gain, best_feature, best_threshold


def _grow_tree(matrix: np.ndarray,
               sorted_rows: np.ndarray,
               residual: np.ndarray,
               sample_mask: np.ndarray,
               params: GbdtParams) -> RegressionTree:
    n_rows = len(matrix)
    msl = params.min_samples_leaf

    node_of = np.where(sample_mask, 0, -1)
    sample_residual = residual[sample_mask]
    root_sse = float(((sample_residual - sample_residual.mean()) ** 2).sum())
    min_gain = MIN_RELATIVE_GAIN * root_sse

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    cover = [int(sample_mask.sum())]
    value = [float(sample_residual.mean())]

    frontier = [0] if cover[0] >= 2 * msl and root_sse > 0 else []
    for _ in range(params.max_depth):
        if not frontier:
            break
        slot_of_node = np.full(len(feature), -1, dtype=np.int64)
        slot_of_node[frontier] = np.arange(len(frontier))
        frontier_pos = np.where(node_of >= 0, slot_of_node[np.maximum(node_of, 0)], -1)

        gains, split_features, thresholds = _best_splits(matrix, sorted_rows, residual,
                                                         frontier_pos, len(frontier), msl)

        child_of_slot = np.full((len(frontier), 2), -1, dtype=np.int64)
        for slot, node in enumerate(frontier):
            if not gains[slot] > min_gain:
                continue
            feature[node] = int(split_features[slot])
            threshold[node] = float(thresholds[slot])
            for side in (0, 1):
                child_of_slot[slot, side] = len(feature)
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                cover.append(0)
                value.append(0.0)
            left[node], right[node] = child_of_slot[slot]

        in_split = frontier_pos >= 0
        in_split[in_split] = child_of_slot[frontier_pos[in_split], 0] >= 0
        moved = np.flatnonzero(in_split)
        if moved.size == 0:
            break
        slots = frontier_pos[moved]
        go_left = matrix[moved, split_features[slots]] < thresholds[slots]
        node_of[moved] = np.where(go_left, child_of_slot[slots, 0], child_of_slot[slots, 1])

        new_nodes = np.unique(child_of_slot[child_of_slot >= 0])
        counts = np.bincount(node_of[moved], minlength=len(feature))
        sums = np.bincount(node_of[moved], weights=residual[moved], minlength=len(feature))
        for node in new_nodes:
            cover[node] = int(counts[node])
            value[node] = float(sums[node] / counts[node])
        frontier = [int(node) for node in new_nodes if cover[node] >= 2 * msl]

    return RegressionTree(feature=feature, threshold=threshold, left=left,
                          right=right, cover=cover, value=value)


def fit(train: Dataset, params: GbdtParams | None = None) -> GbdtModel:
    """
    Fit a least-squares gradient-boosted ensemble.

    Parameters
    ----------
    train : Dataset
        Training rows. Needs at least one feature.
    params : GbdtParams, optional
        Defaults to GbdtParams().

    Returns
    -------
    GbdtModel
        base_score is the target mean. Each tree fits the current residuals
        with variance-reduction splits; leaves hold the mean residual.
        Boosting stops early when a new tree cannot split its root, so a
        constant target yields a model with no trees.

    Raises
    ------
    ValueError
        If 'train' has no feature columns.
    """
    params = GbdtParams() if params is None else params
    if train.n_features == 0:
        raise ValueError(NO_FEATURES_ERROR)

    matrix = train.features
    target = train.target
    n_rows = train.n_rows
    base_score = float(target.mean())
    prediction = np.full(n_rows, base_score)

    sorted_rows = np.stack([np.argsort(matrix[:, j], kind="stable")
                            for j in range(train.n_features)])

    n_sample = max(1, int(np.floor(params.subsample * n_rows)))
    trees = []
    for tree_idx in range(params.n_trees):
        residual = target - prediction
        if params.subsample < 1.0:
            rng = np.random.default_rng(params.seed + tree_idx)
            sample_mask = np.zeros(n_rows, dtype=bool)
            sample_mask[rng.choice(n_rows, size=n_sample, replace=False)] = True
        else:
            sample_mask = np.ones(n_rows, dtype=bool)

        tree = _grow_tree(matrix, sorted_rows, residual, sample_mask, params)
        if tree.n_nodes == 1:
            logger.debug("Stopping after %d trees: root of tree %d cannot be split",
                         tree_idx, tree_idx)
            break
        trees.append(tree)
        prediction += params.learning_rate * predict_tree(tree, matrix)

    logger.debug("Fitted %d trees on %d rows x %d features",
                 len(trees), n_rows, train.n_features)
    return GbdtModel(base_score=base_score,
                     trees=tuple(trees),
                     learning_rate=params.learning_rate,
                     feature_names=train.feature_names)

#--------------------------#
# Parameters and constants #
#--------------------------#

TREE_ARRAY_DTYPES = {
    "feature": np.int64,
    "threshold": np.float64,
    "left": np.int64,
    "right": np.int64,
    "cover": np.int64,
    "value": np.float64,
}

# Splits must reduce the squared error by more than this share of the root's
MIN_RELATIVE_GAIN = 1e-10

# Error strings #
#---------------#

NO_FEATURES_ERROR = "Cannot fit a model on a dataset without feature columns."
WIDTH_MISMATCH_ERROR_TEMPLATE = "Input of shape {} does not match the model's {} features."
MISSING_FEATURES_ERROR_TEMPLATE = "Input lacks the model feature(s) {}."
NON_FINITE_BASE_ERROR_TEMPLATE = "Model base score must be finite, got {}."
LEARNING_RATE_ERROR_TEMPLATE = "Model learning rate must lie in (0, 1], got {}."
TREE_ARRAYS_ERROR_TEMPLATE = "Tree {}: node arrays are empty or of unequal length."
NODE_ORDER_ERROR_TEMPLATE = "Expected node id {}, got {}."
NODE_COVER_ERROR_TEMPLATE = "Tree {}, node {}: cover must be >= 1, got {}."
LEAF_CHILDREN_ERROR_TEMPLATE = "Tree {}, node {}: a leaf cannot have children."
NON_FINITE_LEAF_ERROR_TEMPLATE = "Tree {}, node {}: leaf value is not finite."
NON_FINITE_THRESHOLD_ERROR_TEMPLATE = "Tree {}, node {}: threshold is not finite."
FEATURE_INDEX_ERROR_TEMPLATE = "Tree {}, node {}: feature index {} out of range for {} features."
CHILD_ID_ERROR_TEMPLATE = "Tree {}, node {}: invalid children ({}, {})."
COVER_SUM_ERROR_TEMPLATE = "Tree {}, node {}: cover {} != {} + {} (children)."
TREE_SHAPE_ERROR_TEMPLATE = "Tree {}: every non-root node needs exactly one parent."
