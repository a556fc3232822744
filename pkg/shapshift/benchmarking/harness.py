#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Multi-seed evaluation of feature selectors.

Every selector sees the train and validation sets only. Its feature set is
then scored by refitting the model on train + validation once per seed and
predicting the held-out test set; MAE, RMSE and R2 are summarised as
mean, standard deviation, maximum and minimum over the seeds.
"""

#----------------#
# Import modules #
#----------------#

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.attribution.shapley import global_influence, tree_shap
from shapshift.benchmarking.lasso import LASSO_LAMBDA_GRID, LassoParams, lasso_select
from shapshift.data_handling.dataset import (
    Dataset,
    concat_rows,
    select_features,
    split_chronological,
    split_views
)
from shapshift.data_handling.file_io import format_scalar, write_text_atomic
from shapshift.general.validation_utils import check_choice, check_int
from shapshift.models.gbdt import GbdtParams, fit, predict
from shapshift.selection.error_partition import QuantilePair
from shapshift.selection.metrics import compute_metric
from shapshift.selection.selector import (
    DEFAULT_QUANTILE_GRID,
    SelectorParams,
    run_selection
)
from shapshift.synthetic.concept_shift import ShiftScenario, generate, scenario_grid

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class MetricSummary:
    """
    Test scores of one feature set over a fixed seed list.

    'mae', 'rmse' and 'r2' hold one value per seed, in seed order. They are
    all NaN when the selector returned no features.
    """
    algorithm: str
    feature_set: tuple
    seeds: tuple
    mae: np.ndarray
    rmse: np.ndarray
    r2: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.feature_set)

    def stats(self, metric: str) -> tuple[float, float, float, float]:
        """(mean, std, max, min) of one of 'mae', 'rmse', 'r2'. The std is the population one."""
        check_choice(metric, "metric", SUMMARY_METRICS)
        values = np.asarray(getattr(self, metric), dtype=np.float64)
        if np.isnan(values).any():
            return (math.nan,) * 4
        return (float(values.mean()), float(values.std()),
                float(values.max()), float(values.min()))

    def mean(self, metric: str) -> float:
        return self.stats(metric)[0]


@dataclass(frozen=True)
class GridComparison:
    """
    Outcome of one scenario of a grid run: the SHAPEffects configuration
    with the lowest mean test MAE and, per other algorithm row, that row's
    mean MAE minus the best one (positive means SHAPEffects wins).
    """
    scenario: ShiftScenario
    best_algorithm: str
    best_mae: float
    differences: dict

#------------------#
# Define functions #
#------------------#

# Evaluation #
#------------#

def _empty_summary(algorithm: str, seeds: tuple) -> MetricSummary:
    nan = np.full(len(seeds), np.nan)
    return MetricSummary(algorithm=algorithm, feature_set=(), seeds=seeds,
                         mae=nan, rmse=nan.copy(), r2=nan.copy())


def _test_scores(train_val: Dataset, test: Dataset, params: GbdtParams) -> tuple[float, float, float]:
    model = fit(train_val, params)
    prediction = predict(model, test)
    return tuple(compute_metric(test.target, prediction, metric)
                 for metric in ("MAE", "RMSE", "R2"))


def evaluate(feature_set,
             train_val: Dataset,
             test: Dataset,
             model_params: GbdtParams | None = None,
             seeds=None,
             algorithm: str = "custom") -> MetricSummary:
    """
    Score a feature set on the test data over several model seeds.

    Parameters
    ----------
    feature_set : list[str]
        Non-empty; the order does not matter.
    train_val : Dataset
        Rows the evaluation model is fitted on.
    test : Dataset
        Held-out rows, same columns as 'train_val'.
    model_params : GbdtParams, optional
    seeds : sequence of int, optional
        Model seeds, 1..50 by default.
    algorithm : str
        Label carried into the summary.

    Returns
    -------
    MetricSummary

    Raises
    ------
    ValueError
        If 'feature_set' or 'seeds' is empty.
    KeyError
        If a feature is missing from the data.
    """
    model_params = GbdtParams() if model_params is None else model_params
    seeds = DEFAULT_SEEDS if seeds is None else tuple(check_int(s, "seed") for s in seeds)
    if not seeds:
        raise ValueError(NO_SEEDS_ERROR)
    feature_set = tuple(sorted(feature_set))
    if not feature_set:
        raise ValueError(EMPTY_FEATURE_SET_ERROR)

    train_sel = select_features(train_val, feature_set)
    test_sel = select_features(test, feature_set)

    scores = []
    # the fit only depends on the seed through row subsampling
    seed_sensitive = model_params.subsample < 1.0
    for seed in seeds:
        if seed_sensitive or not scores:
            run_scores = _test_scores(train_sel, test_sel, model_params.with_seed(seed))
        scores.append(run_scores)
        logger.debug("%s seed %d: MAE=%.6g", algorithm, seed, run_scores[0])

    scores = np.asarray(scores, dtype=np.float64)
    return MetricSummary(algorithm=algorithm,
                         feature_set=feature_set,
                         seeds=seeds,
                         mae=scores[:, 0],
                         rmse=scores[:, 1],
                         r2=scores[:, 2])


# Baseline selectors #
#--------------------#

def baseline_topk_shap(train: Dataset,
                       val: Dataset,
                       model_params: GbdtParams | None = None,
                       k: int = 1) -> list[str]:
    """
    The 'k' features with the largest validation global influence of a
    single model fitted on 'train', most influential first. Ties are
    broken alphabetically.

    Raises
    ------
    ValueError
        If 'k' is not in [1, number of features].
    """
    k = check_int(k, "k", minimum=1)
    if k > train.n_features:
        raise ValueError(format_string(K_RANGE_ERROR_TEMPLATE, (k, train.n_features)))
    model_params = GbdtParams() if model_params is None else model_params

    influence = global_influence(tree_shap(fit(train, model_params), val))
    ranking = sorted(zip(train.feature_names, influence.tolist()),
                     key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranking[:k]]


# Tables #
#--------#

def shapeffects_label(q: QuantilePair) -> str:
    return f"shapeffects_{q.q_low}_{q.q_high}"


def lasso_label(lam: float) -> str:
    return f"lasso_{lam}"


def run_table(train: Dataset,
              val: Dataset,
              test: Dataset,
              algorithms=None,
              quantile_grid=None,
              selector_params: SelectorParams | None = None,
              seeds=None,
              k: int | None = None,
              lambdas=None,
              lasso_max_sweeps: int = 1000,
              lasso_tol: float = 1e-6) -> list[MetricSummary]:
    """
    Run every requested selector and evaluate what it picks.

    Parameters
    ----------
    train, val, test : Dataset
        Identical columns. Selectors use 'train' and 'val'; the evaluation
        model is fitted on both and scored on 'test'.
    algorithms : sequence of str, optional
        Any of 'shapeffects' (one row per quantile pair), 'topk_shap',
        'lasso' (one row per penalty) and 'keep_all'. Rows come out in this
        order. All four by default.
    quantile_grid : sequence of QuantilePair, optional
        The five standard pairs by default.
    selector_params : SelectorParams, optional
        Its 'quantiles' are overridden by each grid entry; its
        'model_params' drive every fit.
    seeds : sequence of int, optional
    k : int, optional
        Size of the top-k baseline. Defaults to the size of the
        SHAPEffects (0.1, 0.9) set when that row is computed and non-empty,
        otherwise to half the features, rounded up.
    lambdas : sequence of float, optional
        Lasso penalties, the standard four by default.

    Returns
    -------
    list[MetricSummary]
    """
    if test is None:
        raise ValueError(NO_TEST_ROWS_ERROR)
    algorithms = ALGORITHMS if algorithms is None else tuple(algorithms)
    for name in algorithms:
        check_choice(name, "algorithm", ALGORITHMS)
    quantile_grid = DEFAULT_QUANTILE_GRID if quantile_grid is None else tuple(quantile_grid)
    selector_params = SelectorParams() if selector_params is None else selector_params
    lambdas = LASSO_LAMBDA_GRID if lambdas is None else tuple(lambdas)
    seeds = DEFAULT_SEEDS if seeds is None else tuple(seeds)
    model_params = selector_params.model_params
    train_val = concat_rows(train, val)

    # selection first, so that the top-k size can follow SHAPEffects whatever the row order
    shap_sets = {}
    if "shapeffects" in algorithms:
        for q in quantile_grid:
            logger.info("SHAPEffects with quantiles %s", q)
            trace = run_selection(train, val, replace(selector_params, quantiles=q))
            shap_sets[q] = trace.best_feature_set

    selections = []
    for name in algorithms:
        if name == "shapeffects":
            selections.extend((shapeffects_label(q), shap_sets[q]) for q in quantile_grid)
        elif name == "topk_shap":
            k_run = _resolve_k(k, shap_sets, train.n_features)
            logger.info("Top-k SHAP baseline with k=%d", k_run)
            selections.append(("topk_shap", tuple(baseline_topk_shap(train, val, model_params, k_run))))
        elif name == "lasso":
            for lam in lambdas:
                result = lasso_select(train, LassoParams(lam=lam, max_sweeps=lasso_max_sweeps, tol=lasso_tol))
                logger.info("Lasso lambda=%g selected %d features", lam, len(result.selected))
                selections.append((lasso_label(lam), tuple(result.selected)))
        else:
            selections.append(("keep_all", train.feature_names))

    summaries = []
    for label, feature_set in selections:
        if not feature_set:
            logger.warning("'%s' selected no features; its row is NaN", label)
            summaries.append(_empty_summary(label, seeds))
            continue
        summary = evaluate(feature_set, train_val, test, model_params, seeds, algorithm=label)
        logger.info("%s: %d features, mean test MAE %.6g", label, summary.n_features, summary.mean("mae"))
        summaries.append(summary)
    return summaries


def _resolve_k(k, shap_sets: dict, n_features: int) -> int:
    if k is not None:
        return k
    reference = shap_sets.get(TOPK_REFERENCE_QUANTILES, ())
    if reference:
        return len(reference)
    return math.ceil(n_features / 2)


def run_scenario_table(scn: ShiftScenario,
                       n_train: int = 20000,
                       n_val: int = 5000,
                       **table_kwargs) -> list[MetricSummary]:
    """Generate a scenario, split it chronologically and run 'run_table' on it."""
    ds = generate(scn)
    train, val, test = split_views(ds, split_chronological(ds, n_train, n_val))
    return run_table(train, val, test, **table_kwargs)


def run_grid(kind: str,
             n_train: int = 20000,
             n_val: int = 5000,
             scenario_overrides: dict | None = None,
             **table_kwargs) -> list[GridComparison]:
    """
    'run_scenario_table' over the 81 coefficient combinations of 'kind'.

    The SHAPEffects rows must be part of the table ('algorithms' includes
    'shapeffects'). Scenarios whose SHAPEffects rows are all NaN get a NaN
    best score.
    """
    algorithms = table_kwargs.get("algorithms") or ALGORITHMS
    if "shapeffects" not in algorithms:
        raise ValueError(GRID_WITHOUT_SHAPEFFECTS_ERROR)

    comparisons = []
    scenarios = scenario_grid(kind, **(scenario_overrides or {}))
    for idx, scn in enumerate(scenarios, start=1):
        logger.info("Scenario %d/%d: %s", idx, len(scenarios),
                    (scn.lambda1_a, scn.lambda1_b, scn.lambda2_a, scn.lambda2_b))
        summaries = run_scenario_table(scn, n_train, n_val, **table_kwargs)
        comparisons.append(compare_to_best_shapeffects(scn, summaries))
    return comparisons


def compare_to_best_shapeffects(scn: ShiftScenario, summaries) -> GridComparison:
    shap_rows = [s for s in summaries
                 if s.algorithm.startswith("shapeffects_") and not math.isnan(s.mean("mae"))]
    if shap_rows:
        best = min(shap_rows, key=lambda s: s.mean("mae"))
        best_label, best_mae = best.algorithm, best.mean("mae")
    else:
        best_label, best_mae = "", math.nan
    differences = {s.algorithm: s.mean("mae") - best_mae
                   for s in summaries if not s.algorithm.startswith("shapeffects_")}
    return GridComparison(scenario=scn,
                          best_algorithm=best_label,
                          best_mae=best_mae,
                          differences=differences)


# Output files #
#--------------#

def table_to_text(summaries) -> str:
    lines = [",".join(TABLE_COLUMNS)]
    for summary in summaries:
        cells = [summary.algorithm, str(summary.n_features)]
        for metric in SUMMARY_METRICS:
            cells.extend(format_scalar(value) for value in summary.stats(metric))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table_csv(summaries, path: str | Path) -> str:
    return write_text_atomic(path, table_to_text(summaries), extension="csv")


def write_per_seed_csv(summaries, path: str | Path) -> str:
    """Long format: one 'algorithm,seed,mae,rmse,r2' line per algorithm and seed."""
    lines = [",".join(PER_SEED_COLUMNS)]
    for summary in summaries:
        for seed, mae, rmse, r2 in zip(summary.seeds, summary.mae.tolist(),
                                       summary.rmse.tolist(), summary.r2.tolist()):
            lines.append(",".join([summary.algorithm, str(seed),
                                   format_scalar(mae), format_scalar(rmse), format_scalar(r2)]))
    return write_text_atomic(path, "\n".join(lines) + "\n", extension="csv")


def write_grid_csv(comparisons, path: str | Path) -> str:
    """
    One line per scenario: the four coefficients, the best SHAPEffects
    configuration and its mean MAE, then one 'diff_<algorithm>' column per
    other algorithm (taken from the first scenario).
    """
    others = list(comparisons[0].differences) if comparisons else []
    header = [*GRID_SCENARIO_COLUMNS, "best_algorithm", "best_mae", *(f"diff_{name}" for name in others)]
    lines = [",".join(header)]
    for comp in comparisons:
        scn = comp.scenario
        cells = [format_scalar(value) for value in (scn.lambda1_a, scn.lambda1_b,
                                                    scn.lambda2_a, scn.lambda2_b)]
        cells += [comp.best_algorithm, format_scalar(comp.best_mae)]
        cells += [format_scalar(comp.differences.get(name, math.nan)) for name in others]
        lines.append(",".join(cells))
    return write_text_atomic(path, "\n".join(lines) + "\n", extension="csv")

#--------------------------#
# Parameters and constants #
#--------------------------#

ALGORITHMS = ("shapeffects", "topk_shap", "lasso", "keep_all")
DEFAULT_SEEDS = tuple(range(1, 51))
SUMMARY_METRICS = ("mae", "rmse", "r2")
TOPK_REFERENCE_QUANTILES = QuantilePair(0.1, 0.9)

TABLE_COLUMNS = ("algorithm", "n_features",
                 "mae_mean", "mae_std", "mae_max", "mae_min",
                 "rmse_mean", "rmse_std", "rmse_max", "rmse_min",
                 "r2_mean", "r2_std", "r2_max", "r2_min")
PER_SEED_COLUMNS = ("algorithm", "seed", "mae", "rmse", "r2")
GRID_SCENARIO_COLUMNS = ("lambda1_a", "lambda1_b", "lambda2_a", "lambda2_b")

# Error strings #
#---------------#

NO_SEEDS_ERROR = "At least one evaluation seed is required."
NO_TEST_ROWS_ERROR = "The benchmark needs a non-empty test set."
EMPTY_FEATURE_SET_ERROR = "Cannot evaluate an empty feature set."
K_RANGE_ERROR_TEMPLATE = "k ({}) exceeds the number of features ({})."
GRID_WITHOUT_SHAPEFFECTS_ERROR = "A grid run needs the 'shapeffects' rows in its table."
