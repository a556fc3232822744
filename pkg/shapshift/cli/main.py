#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Command-line entry point.

Subcommands
-----------
synth   Generate a concept-shift scenario (CSV plus metadata sidecar).
select  Run the feature selector and write its trace and selected set.
bench   Evaluate every selector over the seed list (optionally per seed
        or over the whole scenario grid).
shap    Write the attribution matrix of the validation rows.
report  Print a stored selection trace.

Exit codes: 0 on success, 2 when the configuration is invalid, 1 on any
other failure.
"""

#----------------#
# Import modules #
#----------------#

import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string, print_format_string

from shapshift.attribution.shapley import exact_shapley, tree_shap, write_shap_csv
from shapshift.benchmarking.harness import (
    run_grid,
    run_table,
    write_grid_csv,
    write_per_seed_csv,
    write_table_csv
)
from shapshift.cli.run_config import (
    CONFIG_KEYS,
    ConfigError,
    RunConfig,
    flag_names,
    load_config,
    write_config
)
from shapshift.data_handling.dataset import (
    check_split_fractions,
    load_csv,
    split_chronological,
    split_random,
    split_views,
    write_csv
)
from shapshift.data_handling.file_io import write_text_atomic
from shapshift.models.gbdt import as_feature_matrix, fit, predict
from shapshift.models.model_io import load_model, save_model
from shapshift.selection.selector import (
    parsimonious_feature_set,
    read_trace_csv,
    run_selection,
    write_trace_csv
)
from shapshift.synthetic.concept_shift import (
    FEATURE_NAMES,
    generate,
    read_scenario_metadata,
    write_scenario_metadata
)

logger = logging.getLogger(__name__)

#------------------#
# Define functions #
#------------------#

# Argument parsing #
#------------------#

def _config_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", default=None, help="Configuration file ('section.key = value' lines)")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    for key, spec in CONFIG_KEYS.items():
        names = flag_names(key) + (["--scenario"] if key == "synth.kind" else [])
        common.add_argument(*names,
                            dest=FLAG_DEST_PREFIX + key,
                            default=argparse.SUPPRESS,
                            metavar="VALUE",
                            help=f"{spec.doc} (default: '{spec.default}')")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shapshift",
                                     allow_abbrev=False,
                                     description="Shapley-effect feature selection under concept shift")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _config_flags()

    sub.add_parser("synth", parents=[common], allow_abbrev=False, help="Generate a concept-shift scenario")

    p_select = sub.add_parser("select", parents=[common], allow_abbrev=False, help="Run the feature selector")
    p_select.add_argument("--parsimony-tol", type=float, default=0.0,
                          help="Also write the smallest set within this relative tolerance of the best")

    p_bench = sub.add_parser("bench", parents=[common], allow_abbrev=False, help="Benchmark the selectors")
    p_bench.add_argument("--per-seed", action="store_true", help="Also write the per-seed scores")
    p_bench.add_argument("--grid", action="store_true",
                         help="Run every scenario of 'synth.kind' instead of a single table")

    p_shap = sub.add_parser("shap", parents=[common], allow_abbrev=False, help="Explain the validation rows")
    p_shap.add_argument("--model", default=None, help="Explain a saved model instead of fitting one")
    p_shap.add_argument("--save-model", default=None, help="Save the explained model to this path")
    p_shap.add_argument("--verify", action="store_true", help="Check that attributions add up to predictions")
    p_shap.add_argument("--verify-exact", action="store_true",
                        help="Compare the first rows against coalition enumeration")

    p_report = sub.add_parser("report", parents=[common], allow_abbrev=False, help="Print a selection trace")
    p_report.add_argument("--trace", default=None, help="Trace CSV (default: <output.dir>/trace.csv)")
    p_report.add_argument("--parsimony-tol", type=float, default=0.0,
                          help="Relative tolerance of the parsimonious set")
    return parser


def flag_overrides(args: argparse.Namespace) -> dict[str, str]:
    return {dest[len(FLAG_DEST_PREFIX):]: value for dest, value in vars(args).items()
            if dest.startswith(FLAG_DEST_PREFIX)}


def _config_error(key: str, exc: Exception) -> ConfigError:
    return ConfigError(format_string(SETTING_ERROR_TEMPLATE, (key, exc)))


def check_config(config: RunConfig, command: str, grid: bool = False) -> None:
    """
    Build every parameter object the command needs and check the split and
    top-k settings that do not depend on a CSV file, so that bad values fail
    before any model is fitted.
    """
    config.selector_params()
    synthetic = grid or not config["data.path"]
    scn = config.scenario() if command == "synth" or synthetic else None
    if command not in DATA_COMMANDS:
        return

    if config["split.mode"] == "random":
        try:
            check_split_fractions(config["split.fractions"])
        except ValueError as exc:
            raise _config_error("split.fractions", exc) from exc
    if scn is not None:
        # generated scenarios drop one row for the lags
        check_data_settings(config, command, scn.n_samples - 1, len(FEATURE_NAMES))


def check_data_settings(config: RunConfig, command: str, n_rows: int, n_features: int) -> None:
    """
    Check the settings that depend on the size of the data.

    Raises
    ------
    ConfigError
        If the chronological split needs more rows than there are, or if
        'bench.k' exceeds the number of features.
    """
    n_train, n_val = config["split.n_train"], config["split.n_val"]
    if config["split.mode"] == "chronological" and n_train + n_val > n_rows:
        raise ConfigError(format_string(SPLIT_SIZE_ERROR_TEMPLATE, (n_train, n_val, n_rows)))
    k = config["bench.k"]
    if command == "bench" and k is not None and k > n_features:
        raise ConfigError(format_string(K_SIZE_ERROR_TEMPLATE, (k, n_features)))


# Data #
#------#

def load_data(config: RunConfig):
    """
    The configured dataset: the CSV at 'data.path', or the synthetic
    scenario when that key is empty.
    """
    if config["data.path"]:
        return load_csv(config["data.path"], config["data.target"])
    return generate(config.scenario())


def split_data(config: RunConfig, ds, command: str):
    check_data_settings(config, command, ds.n_rows, ds.n_features)
    try:
        if config["split.mode"] == "random":
            split = split_random(ds, config["split.fractions"], config["split.seed"])
        else:
            split = split_chronological(ds, config["split.n_train"], config["split.n_val"])
    except ValueError as exc:
        raise _config_error("split", exc) from exc
    return split, split_views(ds, split)


def _output_path(config: RunConfig, file_name: str) -> str:
    return os.path.join(config["output.dir"], file_name)


def _write_names(names, path: str) -> str:
    return write_text_atomic(path, "".join(f"{name}\n" for name in sorted(names)), extension="txt")


# Commands #
#----------#

def cmd_synth(config: RunConfig, args: argparse.Namespace) -> None:
    scn = config.scenario()
    ds = generate(scn)
    data_path = write_csv(ds, _output_path(config, "scenario.csv"))
    meta_path = write_scenario_metadata(scn, _output_path(config, SCENARIO_META_FILE))
    print_format_string(SYNTH_DONE_TEMPLATE, (ds.n_rows, ds.n_features + 1, data_path, meta_path))


def cmd_select(config: RunConfig, args: argparse.Namespace) -> None:
    ds = load_data(config)
    _, (train, val, _) = split_data(config, ds, "select")
    trace = run_selection(train, val, config.selector_params())

    trace_path = write_trace_csv(trace, _output_path(config, "trace.csv"))
    names_path = _write_names(trace.best_feature_set, _output_path(config, "selected_features.txt"))
    print_format_string(SELECT_DONE_TEMPLATE, (len(trace.iterations), len(trace.best_feature_set),
                                               config["selector.metric"], trace.best_metric,
                                               trace_path, names_path))
    if args.parsimony_tol > 0:
        parsimonious = parsimonious_feature_set(trace, args.parsimony_tol)
        path = _write_names(parsimonious, _output_path(config, "parsimonious_features.txt"))
        print_format_string(PARSIMONIOUS_TEMPLATE, (len(parsimonious), args.parsimony_tol, path))


def _table_kwargs(config: RunConfig) -> dict:
    return dict(algorithms=config["bench.algorithms"],
                selector_params=config.selector_params(),
                seeds=config["bench.seeds"],
                k=config["bench.k"],
                lambdas=config["bench.lambdas"])


def cmd_bench(config: RunConfig, args: argparse.Namespace) -> None:
    if args.grid:
        scn = config.scenario()
        overrides = dict(n_samples=scn.n_samples, break_index=scn.break_index,
                         ramp_len=scn.ramp_len, noise_sd=scn.noise_sd, seed=scn.seed)
        comparisons = run_grid(scn.kind, config["split.n_train"], config["split.n_val"],
                               scenario_overrides=overrides, **_table_kwargs(config))
        path = write_grid_csv(comparisons, _output_path(config, "bench_grid.csv"))
        print_format_string(GRID_DONE_TEMPLATE, (len(comparisons), path))
        return

    ds = load_data(config)
    _, (train, val, test) = split_data(config, ds, "bench")
    summaries = run_table(train, val, test, **_table_kwargs(config))
    path = write_table_csv(summaries, _output_path(config, "bench_table.csv"))
    print_format_string(BENCH_DONE_TEMPLATE, (len(summaries), path))
    for summary in summaries:
        print_format_string(BENCH_ROW_TEMPLATE, (summary.algorithm, summary.n_features, summary.mean("mae")))
    if args.per_seed:
        seed_path = write_per_seed_csv(summaries, _output_path(config, "bench_per_seed.csv"))
        print_format_string(PER_SEED_TEMPLATE, (seed_path,))


def cmd_shap(config: RunConfig, args: argparse.Namespace) -> None:
    ds = load_data(config)
    split, (train, val, _) = split_data(config, ds, "shap")
    model = load_model(args.model) if args.model else fit(train, config.model_params())
    if args.save_model:
        print_format_string(MODEL_SAVED_TEMPLATE, (save_model(model, args.save_model),))

    shap = tree_shap(model, val)
    prediction = predict(model, val)
    path = write_shap_csv(shap, _output_path(config, "shap.csv"), prediction, row_indices=split.val)
    print_format_string(SHAP_DONE_TEMPLATE, (shap.explained_rows, len(shap.feature_names), path))

    if args.verify:
        gap = np.abs(shap.predictions() - prediction)
        bound = np.maximum(ADDITIVITY_TOL, ADDITIVITY_TOL * np.abs(prediction))
        if (gap > bound).any():
            raise RuntimeError(format_string(ADDITIVITY_FAILED_TEMPLATE, (float(gap.max()),)))
        print_format_string(ADDITIVITY_OK_TEMPLATE, (float(gap.max()),))

    if args.verify_exact:
        n_rows = min(VERIFY_EXACT_ROWS, shap.explained_rows)
        matrix = as_feature_matrix(model, val)
        worst = 0.0
        for r in range(n_rows):
            exact = exact_shapley(model, matrix[r])
            worst = max(worst, float(np.abs(exact - shap.values[r]).max()))
        if worst > EXACT_MATCH_TOL:
            raise RuntimeError(format_string(EXACT_FAILED_TEMPLATE, (n_rows, worst)))
        print_format_string(EXACT_OK_TEMPLATE, (n_rows, worst))


def cmd_report(config: RunConfig, args: argparse.Namespace) -> None:
    trace_path = args.trace or _output_path(config, "trace.csv")
    trace = read_trace_csv(trace_path, metric=config["selector.metric"])
    frame = pd.DataFrame([{"iteration": r.iteration,
                           "n_features": len(r.feature_set),
                           "removal_kind": r.removal_kind,
                           "removed": ";".join(r.removed),
                           "metric_value": r.metric_value} for r in trace.iterations],
                         columns=REPORT_COLUMNS)
    print(frame.to_string(index=False))
    print_format_string(REPORT_BEST_TEMPLATE, (trace.metric, trace.best_metric, list(trace.best_feature_set)))
    parsimonious = parsimonious_feature_set(trace, args.parsimony_tol)
    print_format_string(REPORT_PARSIMONIOUS_TEMPLATE, (args.parsimony_tol, list(parsimonious)))

    meta_path = _output_path(config, SCENARIO_META_FILE)
    if os.path.isfile(meta_path):
        scn = read_scenario_metadata(meta_path)
        print_format_string(REPORT_SCENARIO_TEMPLATE,
                            (scn.kind, scn.lambda1_a, scn.lambda1_b, scn.lambda2_a, scn.lambda2_b,
                             scn.n_samples, scn.break_index))


# Entry point #
#-------------#

def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    try:
        config = load_config(args.config, os.environ, flag_overrides(args))
        check_config(config, args.command, grid=getattr(args, "grid", False))
    except (ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        print(format_string(CONFIG_ERROR_TEMPLATE, (exc,)), file=sys.stderr)
        return 2

    try:
        if args.command in DATA_COMMANDS:
            write_config(config, _output_path(config, EFFECTIVE_CONFIG_FILE))
        COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(format_string(CONFIG_ERROR_TEMPLATE, (exc,)), file=sys.stderr)
        return 2
    except Exception as exc:
        logger.debug("Command '%s' failed", args.command, exc_info=True)
        print(format_string(RUNTIME_ERROR_TEMPLATE, (args.command, exc)), file=sys.stderr)
        return 1
    return 0

#--------------------------#
# Parameters and constants #
#--------------------------#

DATA_COMMANDS = ("select", "bench", "shap")
EFFECTIVE_CONFIG_FILE = "run.cfg"
SCENARIO_META_FILE = "scenario_meta.txt"

COMMANDS = {
    "synth": cmd_synth,
    "select": cmd_select,
    "bench": cmd_bench,
    "shap": cmd_shap,
    "report": cmd_report,
}

FLAG_DEST_PREFIX = "cfg:"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
REPORT_COLUMNS = ["iteration", "n_features", "removal_kind", "removed", "metric_value"]

ADDITIVITY_TOL = 1e-8
EXACT_MATCH_TOL = 1e-8
VERIFY_EXACT_ROWS = 20

# Messages #
#----------#

SYNTH_DONE_TEMPLATE = "Wrote {} rows x {} columns to '{}' (metadata: '{}')"
SELECT_DONE_TEMPLATE = "{} iterations, best set of {} features ({}={}). Trace: '{}', features: '{}'"
PARSIMONIOUS_TEMPLATE = "Parsimonious set of {} features (tolerance {}): '{}'"
BENCH_DONE_TEMPLATE = "{} table rows written to '{}'"
BENCH_ROW_TEMPLATE = "  {}: {} features, mean test MAE {}"
PER_SEED_TEMPLATE = "Per-seed scores written to '{}'"
GRID_DONE_TEMPLATE = "{} scenarios compared, written to '{}'"
MODEL_SAVED_TEMPLATE = "Model saved to '{}'"
SHAP_DONE_TEMPLATE = "Attributions of {} rows x {} features written to '{}'"
ADDITIVITY_OK_TEMPLATE = "Additivity check passed (largest gap {})"
EXACT_OK_TEMPLATE = "Exact check passed on {} rows (largest difference {})"
REPORT_BEST_TEMPLATE = "Best {} = {}: {}"
REPORT_PARSIMONIOUS_TEMPLATE = "Parsimonious set (tolerance {}): {}"
REPORT_SCENARIO_TEMPLATE = "Scenario: {} shift, lambdas ({}, {}, {}, {}), {} samples, break at {}"

# Error strings #
#---------------#

CONFIG_ERROR_TEMPLATE = "Configuration error: {}"
SETTING_ERROR_TEMPLATE = "Invalid '{}' setting: {}"
SPLIT_SIZE_ERROR_TEMPLATE = "split.n_train ({}) + split.n_val ({}) exceeds the number of rows ({})."
K_SIZE_ERROR_TEMPLATE = "bench.k ({}) exceeds the number of features ({})."
RUNTIME_ERROR_TEMPLATE = "'{}' failed: {}"
ADDITIVITY_FAILED_TEMPLATE = "Attributions do not add up to the predictions (largest gap {})."
EXACT_FAILED_TEMPLATE = "Tree attributions differ from coalition enumeration on {} rows (largest difference {})."
