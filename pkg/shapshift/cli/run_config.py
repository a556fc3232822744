#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Run configuration for the command-line tool.

A configuration is a flat set of 'section.key' entries. Values are taken,
from lowest to highest priority, from the documented defaults, a
'section.key = value' text file, 'SHAPSHIFT_SECTION__KEY' environment
variables and command-line flags. Every layer is parsed from text with the
same per-key parser, and unknown keys are rejected.
"""

#----------------#
# Import modules #
#----------------#

import os
from dataclasses import dataclass, field
from pathlib import Path

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.file_io import format_scalar, read_key_value_file, write_text_atomic
from shapshift.models.gbdt import GbdtParams
from shapshift.selection.error_partition import QuantilePair
from shapshift.selection.metrics import METRIC_CHOICES
from shapshift.selection.selector import SelectorParams
from shapshift.synthetic.concept_shift import CASES, SHIFT_KINDS, ShiftScenario

#----------------#
# Define classes #
#----------------#

class ConfigError(ValueError):
    """Unknown configuration key or unparsable value."""


@dataclass(frozen=True)
class ConfigKey:
    parser: object
    default: str
    doc: str


@dataclass(frozen=True)
class RunConfig:
    """
    Parsed configuration values by 'section.key', plus the layer each
    value came from ('default', 'file', 'env' or 'flag').
    """
    values: dict
    sources: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def section(self, name: str) -> dict:
        """Values of one section, keyed by the bare key name."""
        prefix = f"{name}."
        return {key[len(prefix):]: value for key, value in self.values.items()
                if key.startswith(prefix)}

    def model_params(self) -> GbdtParams:
        return GbdtParams(**self.section("model"), seed=self["selector.seed"])

    def selector_params(self) -> SelectorParams:
        sel = self.section("selector")
        return SelectorParams(quantiles=QuantilePair(sel["q_low"], sel["q_high"]),
                              n_iter_prev=sel["n_iter_prev"],
                              metric=sel["metric"],
                              model_params=self.model_params(),
                              seed=sel["seed"],
                              zero_tolerance=sel["zero_tolerance"])

    def scenario(self) -> ShiftScenario:
        """The synthetic scenario; 'synth.lambdas' wins over 'synth.case' when set."""
        synth = self.section("synth")
        lambdas = synth["lambdas"] or CASES[synth["case"]]
        return ShiftScenario(*lambdas,
                             kind=synth["kind"],
                             n_samples=synth["n_samples"],
                             break_index=synth["break_index"],
                             ramp_len=synth["ramp_len"],
                             noise_sd=synth["noise_sd"],
                             seed=synth["seed"])

    def to_text(self) -> str:
        lines = [f"{key} = {_format_value(value)}" for key, value in self.values.items()]
        return "\n".join(lines) + "\n"

#------------------#
# Define functions #
#------------------#

# Value parsers #
#---------------#

def _parse_str(raw: str) -> str:
    return raw


def _parse_int(raw: str) -> int:
    return int(raw)


def _parse_float(raw: str) -> float:
    return float(raw)


def _parse_optional_int(raw: str) -> int | None:
    return None if raw == "" else int(raw)


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _parse_float_list(raw: str) -> tuple:
    return tuple(float(item) for item in _split_list(raw))


def _parse_lambdas(raw: str) -> tuple:
    """Empty, or exactly four coefficients."""
    lambdas = _parse_float_list(raw)
    if lambdas and len(lambdas) != 4:
        raise ValueError(format_string(LAMBDA_COUNT_ERROR_TEMPLATE, (len(lambdas),)))
    return lambdas


def _parse_seed_list(raw: str) -> tuple:
    """'1..50' (inclusive range) or a comma-separated list of integers."""
    if ".." in raw:
        first, last = (int(part) for part in raw.split("..", 1))
        return tuple(range(first, last + 1))
    return tuple(int(item) for item in _split_list(raw))


def _choice(options):
    def parse(raw: str) -> str:
        if raw not in options:
            raise ValueError(format_string(CHOICE_ERROR_TEMPLATE, (raw, list(options))))
        return raw
    return parse


def _choice_list(options):
    def parse(raw: str) -> tuple:
        items = tuple(_split_list(raw))
        for item in items:
            _choice(options)(item)
        return items
    return parse


def _int_choice(options):
    def parse(raw: str) -> int:
        _choice(tuple(str(opt) for opt in options))(raw)
        return int(raw)
    return parse


def _format_value(value) -> str:
    return "" if value is None else format_scalar(value)


def parse_value(key: str, raw: str):
    """
    Parse the text form of one configuration value.

    Raises
    ------
    ConfigError
        If 'key' is unknown or 'raw' does not parse.
    """
    if key not in CONFIG_KEYS:
        raise ConfigError(format_string(UNKNOWN_KEY_ERROR_TEMPLATE, (key, "input")))
    try:
        return CONFIG_KEYS[key].parser(str(raw).strip())
    except ValueError as exc:
        raise ConfigError(format_string(INVALID_VALUE_ERROR_TEMPLATE, (raw, key, exc))) from exc


# Layers #
#--------#

def read_config_file(path: str | Path) -> dict[str, str]:
    """Raw 'section.key = value' entries of a config file; unknown keys are rejected."""
    raw = read_key_value_file(path)
    unknown = [key for key in raw if key not in CONFIG_KEYS]
    if unknown:
        raise ConfigError(format_string(UNKNOWN_KEY_ERROR_TEMPLATE, (unknown, path)))
    return raw


def env_overrides(environ=None) -> dict[str, str]:
    """
    Raw entries from 'SHAPSHIFT_SECTION__KEY' variables,
    e.g. SHAPSHIFT_SELECTOR__Q_LOW=0.2 sets 'selector.q_low'.
    """
    environ = os.environ if environ is None else environ
    raw = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".", 1)
        if key not in CONFIG_KEYS:
            raise ConfigError(format_string(UNKNOWN_KEY_ERROR_TEMPLATE, (key, name)))
        raw[key] = value
    return raw


def load_config(config_path: str | Path | None = None,
                environ=None,
                overrides: dict | None = None) -> RunConfig:
    """
    Merge defaults, the optional config file, the environment and
    'overrides' (raw text values by key, from the command line).

    Raises
    ------
    ConfigError
        On an unknown key or a value that does not parse.
    FileNotFoundError
        If 'config_path' is given but missing.
    """
    layers = [("default", {key: spec.default for key, spec in CONFIG_KEYS.items()})]
    if config_path:
        layers.append(("file", read_config_file(config_path)))
    layers.append(("env", env_overrides(environ)))
    layers.append(("flag", dict(overrides or {})))

    raw, sources = {}, {}
    for source, entries in layers:
        for key, value in entries.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(format_string(UNKNOWN_KEY_ERROR_TEMPLATE, (key, source)))
            raw[key] = value
            sources[key] = source
    values = {key: parse_value(key, raw[key]) for key in CONFIG_KEYS}
    return RunConfig(values=values, sources=sources)


def write_config(config: RunConfig, path: str | Path) -> str:
    """Write the effective configuration back in the file syntax."""
    return write_text_atomic(path, config.to_text(), extension="cfg")


def flag_names(key: str) -> list[str]:
    """
    Command-line spellings of a key: '--section.key-name' always, plus
    '--key-name' when the bare key is unique across sections.
    """
    section, name = key.split(".", 1)
    dashed = name.replace("_", "-")
    names = [f"--{section}.{dashed}"]
    if sum(other.split(".", 1)[1] == name for other in CONFIG_KEYS) == 1:
        names.append(f"--{dashed}")
    return names

#--------------------------#
# Parameters and constants #
#--------------------------#

ENV_PREFIX = "SHAPSHIFT_"

SPLIT_MODES = ("chronological", "random")
BENCH_ALGORITHMS = ("shapeffects", "topk_shap", "lasso", "keep_all")

CONFIG_KEYS = {
    "data.path": ConfigKey(_parse_str, "", "CSV file to read; empty generates the synthetic scenario"),
    "data.target": ConfigKey(_parse_str, "y", "Target column of the CSV file"),
    "split.mode": ConfigKey(_choice(SPLIT_MODES), "chronological", "Row split"),
    "split.n_train": ConfigKey(_parse_int, "20000", "Training rows (chronological split)"),
    "split.n_val": ConfigKey(_parse_int, "5000", "Validation rows (chronological split)"),
    "split.fractions": ConfigKey(_parse_float_list, "0.6,0.2,0.2", "Train, val, test fractions (random split)"),
    "split.seed": ConfigKey(_parse_int, "0", "Seed of the random split"),
    "selector.q_low": ConfigKey(_parse_float, "0.1", "Lower error quantile"),
    "selector.q_high": ConfigKey(_parse_float, "0.9", "Upper error quantile"),
    "selector.n_iter_prev": ConfigKey(_parse_int, "30", "Shadow-phase refits; 0 skips the phase"),
    "selector.metric": ConfigKey(_choice(METRIC_CHOICES), "MAE", "Validation metric picking the best set"),
    "selector.zero_tolerance": ConfigKey(_parse_float, "0.0", "Total effect treated as no effect"),
    "selector.seed": ConfigKey(_parse_int, "0", "Seed of the selector and its models"),
    "model.n_trees": ConfigKey(_parse_int, "250", "Boosting rounds"),
    "model.learning_rate": ConfigKey(_parse_float, "0.1", "Shrinkage"),
    "model.max_depth": ConfigKey(_parse_int, "6", "Maximum tree depth"),
    "model.min_samples_leaf": ConfigKey(_parse_int, "20", "Minimum rows per leaf"),
    "model.subsample": ConfigKey(_parse_float, "1.0", "Row fraction drawn per tree"),
    "bench.seeds": ConfigKey(_parse_seed_list, "1..50", "Evaluation seeds, 'a..b' or a comma list"),
    "bench.algorithms": ConfigKey(_choice_list(BENCH_ALGORITHMS), ",".join(BENCH_ALGORITHMS),
                                  "Table rows, in order"),
    "bench.k": ConfigKey(_parse_optional_int, "", "Top-k size; empty follows SHAPEffects (0.1, 0.9)"),
    "bench.lambdas": ConfigKey(_parse_float_list, "0.01,0.001,0.0001,1e-05", "Lasso penalties"),
    "synth.kind": ConfigKey(_choice(SHIFT_KINDS), "sudden", "Concept-shift kind"),
    "synth.case": ConfigKey(_int_choice(tuple(CASES)), "1", "Representative coefficient setting"),
    "synth.lambdas": ConfigKey(_parse_lambdas, "", "l1_a,l1_b,l2_a,l2_b; overrides synth.case"),
    "synth.n_samples": ConfigKey(_parse_int, "30000", "Samples drawn"),
    "synth.break_index": ConfigKey(_parse_int, "20000", "First shifted sample"),
    "synth.ramp_len": ConfigKey(_parse_int, "5000", "Ramp length of an incremental shift"),
    "synth.noise_sd": ConfigKey(_parse_float, "0.1", "Noise standard deviation"),
    "synth.seed": ConfigKey(_parse_int, "0", "Generation seed"),
    "output.dir": ConfigKey(_parse_str, "shapshift_output", "Directory receiving every output file"),
}

# Error strings #
#---------------#

UNKNOWN_KEY_ERROR_TEMPLATE = "Unknown configuration key(s) {} (from {})."
INVALID_VALUE_ERROR_TEMPLATE = "Invalid value '{}' for '{}': {}"
CHOICE_ERROR_TEMPLATE = "'{}' is not one of {}"
LAMBDA_COUNT_ERROR_TEMPLATE = "expected 4 coefficients, got {}"
