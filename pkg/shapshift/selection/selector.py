#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Backward feature elimination driven by error-partitioned Shapley effects.

An optional shadow phase first drops every feature whose mean global
influence does not beat a permuted copy of the most influential feature.
The main loop then refits the model on the surviving features, scores
each feature's negative influence on the validation errors and removes
either every feature with no effect at all or the single most harmful
one, until nothing is removed. The feature set with the best validation
metric over all iterations is returned.
"""

#----------------#
# Import modules #
#----------------#

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.attribution.shapley import ShapMatrix, global_influence, tree_shap
from shapshift.data_handling.dataset import (
    Dataset,
    permute_column,
    select_features
)
from shapshift.data_handling.file_io import write_text_atomic
from shapshift.general.validation_utils import check_choice, check_int, check_real
from shapshift.models.gbdt import GbdtParams, fit, predict
from shapshift.selection.error_partition import (
    ErrorPartition,
    GroupEffects,
    NegInfluence,
    QuantilePair,
    classify_errors,
    group_effects,
    negative_influence
)
from shapshift.selection.metrics import (
    METRIC_CHOICES,
    compute_metric,
    higher_is_better,
    is_improvement
)

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class SelectorParams:
    quantiles: QuantilePair = field(default_factory=lambda: QuantilePair(0.1, 0.9))
    n_iter_prev: int = 30
    metric: str = "MAE"
    model_params: GbdtParams = field(default_factory=GbdtParams)
    seed: int = 0
    zero_tolerance: float = 0.0

    def __post_init__(self):
        if not isinstance(self.quantiles, QuantilePair):
            raise TypeError(QUANTILES_TYPE_ERROR)
        check_int(self.n_iter_prev, "n_iter_prev", minimum=0)
        check_choice(self.metric, "metric", METRIC_CHOICES)
        check_int(self.seed, "seed")
        check_real(self.zero_tolerance, "zero_tolerance", low=0.0)


@dataclass(frozen=True)
class ShadowReport:
    """Outcome of the shadow phase."""
    shadow_name: str
    source_feature: str
    mean_influence: dict
    kept: tuple
    dropped: tuple


@dataclass(frozen=True)
class SelectionIteration:
    """
    One pass of the elimination loop. The attribution snapshots are None
    when the iteration was rebuilt from a trace file.
    """
    iteration: int
    feature_set: tuple
    removed: tuple
    removal_kind: str
    metric_value: float
    neg_influence: NegInfluence | None = None
    group_effects: GroupEffects | None = None
    partition: ErrorPartition | None = None
    shap: ShapMatrix | None = None


@dataclass(frozen=True)
class SelectionTrace:
    iterations: tuple
    best_feature_set: tuple
    best_metric: float
    metric: str = "MAE"
    shadow: ShadowReport | None = None

    @property
    def best_iteration(self) -> SelectionIteration | None:
        for record in self.iterations:
            if (record.feature_set == self.best_feature_set
                    and _same_metric(record.metric_value, self.best_metric)):
                return record
        return None

#------------------#
# Define functions #
#------------------#

# Helpers #
#---------#

def _same_metric(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


def _validation_influence(train: Dataset, val: Dataset, model_params: GbdtParams) -> np.ndarray:
    model = fit(train, model_params)
    return global_influence(tree_shap(model, val))


def _shadow_name(ds: Dataset, source: str) -> str:
    name = f"{SHADOW_PREFIX}{source}"
    suffix = 1
    while name in ds.feature_names or name == ds.target_name:
        name = f"{SHADOW_PREFIX}{source}_{suffix}"
        suffix += 1
    return name


def pick_best(iterations, metric: str) -> tuple[tuple, float]:
    """
    Arg-optimum of the recorded metric. Ties go to the smaller feature set,
    then to the earlier iteration.
    """
    best_set, best_value = (), math.nan
    for record in iterations:
        value = record.metric_value
        if math.isnan(value):
            continue
        better = is_improvement(value, best_value, metric)
        tie = value == best_value and len(record.feature_set) < len(best_set)
        if better or tie:
            best_set, best_value = record.feature_set, value
    return best_set, best_value


# Shadow phase #
#--------------#

def preprocess_shadow(train: Dataset,
                      val: Dataset,
                      params: SelectorParams,
                      return_report: bool = False):
    """
    Drop features that are no more influential than noise.

    Steps:

    1. Fit on all features (seed 'params.seed') and take the feature with
       the largest validation global influence (alphabetical on ties).
    2. Append a seeded permutation of it to train and validation.
    3. Refit 'params.n_iter_prev' times with seeds seed + 1, seed + 2, ...
       and average the validation global influences.
    4. Keep only the features whose mean influence exceeds the shadow's.

    Parameters
    ----------
    train, val : Dataset
    params : SelectorParams
        'n_iter_prev' must be >= 1.
    return_report : bool, optional
        Also return a ShadowReport.

    Returns
    -------
    list[str] | tuple[list[str], ShadowReport]
        Surviving feature names (possibly empty).
    """
    n_iter = check_int(params.n_iter_prev, "n_iter_prev", minimum=1)
    if train.n_features == 0:
        raise ValueError(NO_FEATURES_ERROR)

    base_params = params.model_params.with_seed(params.seed)
    influence = _validation_influence(train, val, base_params)
    source = train.feature_names[int(np.argmax(influence))]

    shadow = _shadow_name(train, source)
    train_sh = permute_column(train, source, params.seed, shadow)
    val_sh = permute_column(val, source, params.seed + 1, shadow)
    logger.info("Shadow phase: '%s' permutes '%s', %d refits", shadow, source, n_iter)

    total = np.zeros(train_sh.n_features)
    # the seed only reaches the fit through row subsampling
    seed_sensitive = params.model_params.subsample < 1.0
    for k in range(1, n_iter + 1):
        if seed_sensitive or k == 1:
            run_influence = _validation_influence(train_sh, val_sh,
                                                  params.model_params.with_seed(params.seed + k))
        total += run_influence
        logger.debug("Shadow refit %d/%d done", k, n_iter)
    mean_influence = total / n_iter

    shadow_idx = train_sh.feature_names.index(shadow)
    threshold = mean_influence[shadow_idx]
    kept = [name for j, name in enumerate(train_sh.feature_names)
            if j != shadow_idx and mean_influence[j] > threshold]
    dropped = [name for name in train.feature_names if name not in kept]
    logger.info("Shadow phase kept %d of %d features", len(kept), train.n_features)

    if not return_report:
        return kept
    report = ShadowReport(shadow_name=shadow,
                          source_feature=source,
                          mean_influence=dict(zip(train_sh.feature_names, mean_influence.tolist())),
                          kept=tuple(kept),
                          dropped=tuple(dropped))
    return kept, report


# Elimination loop #
#------------------#

def run_selection(train: Dataset, val: Dataset, params: SelectorParams | None = None) -> SelectionTrace:
    """
    Run the shadow phase (when 'n_iter_prev' > 0) and the elimination loop.

    Parameters
    ----------
    train, val : Dataset
        Same feature columns; the model is fitted on 'train' and every
        score is computed on 'val'.
    params : SelectorParams, optional

    Returns
    -------
    SelectionTrace
        Every loop iteration, including the last one that removes nothing,
        plus the best feature set by validation metric. If the shadow phase
        drops everything the trace has no iterations, an empty best set and
        a NaN best metric.
    """
    params = SelectorParams() if params is None else params
    if train.feature_names != val.feature_names:
        raise ValueError(format_string(COLUMN_MISMATCH_ERROR_TEMPLATE,
                                       (list(train.feature_names), list(val.feature_names))))
    if train.n_features == 0:
        raise ValueError(NO_FEATURES_ERROR)

    shadow_report = None
    features = list(train.feature_names)
    if params.n_iter_prev > 0:
        features, shadow_report = preprocess_shadow(train, val, params, return_report=True)
        if not features:
            logger.warning("The shadow phase removed every feature")

    model_params = params.model_params.with_seed(params.seed)
    iterations = []
    removed_any = True
    while features and removed_any:
        iteration = len(iterations) + 1
        train_it = select_features(train, features)
        val_it = select_features(val, features)

        model = fit(train_it, model_params)
        prediction = predict(model, val_it)
        shap = tree_shap(model, val_it)
        partition = classify_errors(val_it.target - prediction, params.quantiles)
        effects = group_effects(shap, partition)
        influence = negative_influence(effects, partition.median_err, params.zero_tolerance)
        metric_value = compute_metric(val_it.target, prediction, params.metric)

        infinite = np.isinf(influence.values)
        if infinite.any():
            removed = [name for name, flag in zip(val_it.feature_names, infinite) if flag]
            kind = "infinite-sweep"
        elif (influence.values > 0).any():
            removed = [val_it.feature_names[int(np.argmax(influence.values))]]
            kind = "max-neg-inf"
        else:
            removed = []
            kind = "none"

        iterations.append(SelectionIteration(iteration=iteration,
                                             feature_set=tuple(features),
                                             removed=tuple(removed),
                                             removal_kind=kind,
                                             metric_value=metric_value,
                                             neg_influence=influence,
                                             group_effects=effects,
                                             partition=partition,
                                             shap=shap))
        logger.info("Iteration %d: %d features, %s=%.6g, %s %s",
                    iteration, len(features), params.metric, metric_value, kind, removed)
        features = [name for name in features if name not in removed]
        removed_any = bool(removed)

    best_set, best_metric = pick_best(iterations, params.metric)
    return SelectionTrace(iterations=tuple(iterations),
                          best_feature_set=best_set,
                          best_metric=best_metric,
                          metric=params.metric,
                          shadow=shadow_report)


def parsimonious_feature_set(trace: SelectionTrace, rel_tolerance: float) -> tuple:
    """
    Smallest recorded feature set whose metric is within 'rel_tolerance'
    (relative to |best|) of the best one. Ties go to the earlier iteration.
    With 'rel_tolerance' = 0 this is the best set itself.
    """
    rel_tolerance = check_real(rel_tolerance, "rel_tolerance", low=0.0)
    if not trace.iterations or math.isnan(trace.best_metric):
        return trace.best_feature_set

    slack = rel_tolerance * abs(trace.best_metric)
    if higher_is_better(trace.metric):
        admissible = [r for r in trace.iterations if r.metric_value >= trace.best_metric - slack]
    else:
        admissible = [r for r in trace.iterations if r.metric_value <= trace.best_metric + slack]
    smallest = min(admissible, key=lambda r: (len(r.feature_set), r.iteration))
    # never worse than the exact optimum at the same size
    if len(smallest.feature_set) >= len(trace.best_feature_set):
        return trace.best_feature_set
    return smallest.feature_set


# Trace files #
#-------------#

def trace_to_text(trace: SelectionTrace) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for record in trace.iterations:
        lines.append(",".join([str(record.iteration),
                               str(len(record.feature_set)),
                               LIST_SEPARATOR.join(record.removed),
                               record.removal_kind,
                               repr(float(record.metric_value))]))
    lines.append(",".join(["best",
                           str(len(trace.best_feature_set)),
                           LIST_SEPARATOR.join(trace.best_feature_set),
                           repr(float(trace.best_metric))]))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: SelectionTrace, path: str | Path) -> str:
    """Write the trace as CSV; the last line carries the best set."""
    return write_text_atomic(path, trace_to_text(trace), extension="csv")


def read_trace_csv(path: str | Path, metric: str = "MAE") -> SelectionTrace:
    """
    Rebuild a SelectionTrace from 'write_trace_csv' output.

    Feature sets are reconstructed from the best set and the removal lists;
    attribution snapshots are not stored in the file and come back as None.
    """
    path = str(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(format_string(FILE_NOT_FOUND_ERROR_TEMPLATE, (path,)))
    check_choice(metric, "metric", METRIC_CHOICES)

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, index_col=False)
    if list(frame.columns) != list(TRACE_COLUMNS) or frame.empty:
        raise ValueError(format_string(TRACE_FORMAT_ERROR_TEMPLATE, (path,)))
    best_row = frame.iloc[-1]
    if best_row["iteration"] != "best":
        raise ValueError(format_string(TRACE_FORMAT_ERROR_TEMPLATE, (path,)))

    def split_names(cell: str) -> list[str]:
        return [name for name in cell.split(LIST_SEPARATOR) if name]

    best_set = tuple(split_names(best_row["removed"]))
    best_metric = float(best_row["removal_kind"])
    rows = frame.iloc[:-1]
    removed = [split_names(cell) for cell in rows["removed"]]
    sizes = [int(cell) for cell in rows["n_features"]]
    metrics = [float(cell) for cell in rows["metric_value"]]

    anchor = next((i for i, (size, value) in enumerate(zip(sizes, metrics))
                   if size == len(best_set) and _same_metric(value, best_metric)), None)
    if anchor is None and rows.empty:
        return SelectionTrace(iterations=(), best_feature_set=best_set,
                              best_metric=best_metric, metric=metric)
    if anchor is None:
        raise ValueError(format_string(TRACE_FORMAT_ERROR_TEMPLATE, (path,)))

    feature_sets = [None] * len(rows)
    feature_sets[anchor] = sorted(best_set)
    for i in range(anchor - 1, -1, -1):
        feature_sets[i] = sorted(set(feature_sets[i + 1]) | set(removed[i]))
    for i in range(anchor + 1, len(rows)):
        feature_sets[i] = [name for name in feature_sets[i - 1] if name not in removed[i - 1]]

    iterations = tuple(SelectionIteration(iteration=int(rows.iloc[i]["iteration"]),
                                          feature_set=tuple(feature_sets[i]),
                                          removed=tuple(removed[i]),
                                          removal_kind=rows.iloc[i]["removal_kind"],
                                          metric_value=metrics[i])
                       for i in range(len(rows)))
    return SelectionTrace(iterations=iterations,
                          best_feature_set=best_set,
                          best_metric=best_metric,
                          metric=metric)

#--------------------------#
# Parameters and constants #
#--------------------------#

SHADOW_PREFIX = "shadow_"
LIST_SEPARATOR = ";"
TRACE_COLUMNS = ("iteration", "n_features", "removed", "removal_kind", "metric_value")

DEFAULT_QUANTILE_GRID = (
    QuantilePair(0.25, 0.75),
    QuantilePair(0.2, 0.8),
    QuantilePair(0.15, 0.85),
    QuantilePair(0.1, 0.9),
    QuantilePair(0.05, 0.95),
)

# Error strings #
#---------------#

QUANTILES_TYPE_ERROR = "'quantiles' must be a QuantilePair."
NO_FEATURES_ERROR = "Feature selection needs at least one feature."
COLUMN_MISMATCH_ERROR_TEMPLATE = "Train and validation columns differ: {} vs {}"
FILE_NOT_FOUND_ERROR_TEMPLATE = "Trace file not found: '{}'"
TRACE_FORMAT_ERROR_TEMPLATE = "'{}' is not a selection trace file."
