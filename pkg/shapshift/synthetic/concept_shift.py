#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Synthetic concept-shift scenarios.

The target is a fixed nonlinear autoregressive function of ten uniform
inputs, of which only the first five matter:

    f(x_t) = 2 x1 + l1 x2^2 + 3 sin(2 pi x3) - 0.4 x4 + l2 x5^2   (at t)
           + 2 x1 + l1 x2^2 + 3 sin(2 pi x3) - 0.4 x4 + l2 x5^2   (at t - 1)
           + noise

The coefficients l1 and l2 switch from their "a" to their "b" value either
at once (sudden shift) or along a ramp (incremental shift).
"""

#----------------#
# Import modules #
#----------------#

import itertools
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.data_handling.dataset import Dataset, from_arrays
from shapshift.data_handling.file_io import read_key_value_file, write_key_value_file
from shapshift.general.validation_utils import check_choice, check_int, check_real

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class ShiftScenario:
    lambda1_a: float
    lambda1_b: float
    lambda2_a: float
    lambda2_b: float
    kind: str = "sudden"
    n_samples: int = 30000
    break_index: int = 20000
    ramp_len: int = 5000
    noise_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda1_a", "lambda1_b", "lambda2_a", "lambda2_b"):
            object.__setattr__(self, name, check_real(getattr(self, name), name))
        check_choice(self.kind, "kind", SHIFT_KINDS)
        check_int(self.n_samples, "n_samples", minimum=2)
        check_int(self.break_index, "break_index", minimum=0)
        check_int(self.ramp_len, "ramp_len", minimum=1)
        object.__setattr__(self, "noise_sd", check_real(self.noise_sd, "noise_sd", low=0.0))
        check_int(self.seed, "seed")

        if self.break_index >= self.n_samples:
            raise ValueError(format_string(BREAK_INDEX_ERROR_TEMPLATE,
                                           (self.break_index, self.n_samples)))
        if self.kind == "incremental" and self.break_index + self.ramp_len > self.n_samples:
            raise ValueError(format_string(RAMP_ERROR_TEMPLATE,
                                           (self.break_index, self.ramp_len, self.n_samples)))

    def lambdas(self, which: int) -> tuple[float, float]:
        check_choice(which, "which", (1, 2))
        if which == 1:
            return self.lambda1_a, self.lambda1_b
        return self.lambda2_a, self.lambda2_b

#------------------#
# Define functions #
#------------------#

# Coefficient schedules #
#-----------------------#

def lambda_at(scn: ShiftScenario, which: int, index: int) -> float:
    """
    Value of coefficient 'which' (1 or 2) at sample 'index'.

    - sudden: a before 'break_index', b from it on.
    - incremental: a up to 'break_index', b from 'break_index + ramp_len'
      on, and ((b - a)(index - break_index) + 10000 a) / 10000 in between.
      The denominator is fixed at 10000 whatever the ramp length, so with
      the default 5000-sample ramp the coefficient stops halfway and then
      jumps to b.
    - none: always a.

    Raises
    ------
    IndexError
        If 'index' is outside [0, n_samples).
    """
    index = check_int(index, "index")
    if not 0 <= index < scn.n_samples:
        raise IndexError(format_string(INDEX_ERROR_TEMPLATE, (index, scn.n_samples)))
    value_a, value_b = scn.lambdas(which)

    if scn.kind == "none":
        return value_a
    if scn.kind == "sudden":
        return value_a if index < scn.break_index else value_b
    if index <= scn.break_index:
        return value_a
    if index >= scn.break_index + scn.ramp_len:
        return value_b
    return (((value_b - value_a) * (index - scn.break_index) + RAMP_DENOMINATOR * value_a)
            / RAMP_DENOMINATOR)


def lambda_schedule(scn: ShiftScenario, which: int) -> np.ndarray:
    """'lambda_at' for every index 0..n_samples-1."""
    value_a, value_b = scn.lambdas(which)
    index = np.arange(scn.n_samples)
    if scn.kind == "none":
        return np.full(scn.n_samples, value_a)
    if scn.kind == "sudden":
        return np.where(index < scn.break_index, value_a, value_b)

    ramp = ((value_b - value_a) * (index - scn.break_index) + RAMP_DENOMINATOR * value_a) / RAMP_DENOMINATOR
    schedule = np.where(index <= scn.break_index, value_a, ramp)
    return np.where(index >= scn.break_index + scn.ramp_len, value_b, schedule)


# Target function #
#-----------------#

def half_target(x: np.ndarray, lambda1, lambda2) -> np.ndarray:
    """2 x1 + l1 x2^2 + 3 sin(2 pi x3) - 0.4 x4 + l2 x5^2 for rows of x."""
    x = np.atleast_2d(x)
    return (2.0 * x[:, 0]
            + lambda1 * x[:, 1] ** 2
            + 3.0 * np.sin(2.0 * np.pi * x[:, 2])
            - 0.4 * x[:, 3]
            + lambda2 * x[:, 4] ** 2)


def target_function(x_now: np.ndarray, x_prev: np.ndarray, lambda1, lambda2) -> np.ndarray:
    """Noise-free target: the current and the lagged terms share the coefficients."""
    return half_target(x_now, lambda1, lambda2) + half_target(x_prev, lambda1, lambda2)


# Generation #
#------------#

def generate(scn: ShiftScenario) -> Dataset:
    """
    Draw a scenario as a Dataset.

    n_samples + 1 input rows are drawn so that sample 0 has a predecessor;
    the target is computed for samples 0..n_samples-1 with the coefficients
    of each sample's own index. Sample 0 is then dropped because its
    target lag is unknown, leaving n_samples - 1 rows.

    Dataset row r therefore holds sample r + 1. The first shifted sample
    'break_index' sits at row break_index - 1, so a chronological split with
    n_train = break_index puts exactly one shifted row at the end of the
    training set.

    Returns
    -------
    Dataset
        21 features: x01..x10 at t, x01_lag1..x10_lag1 at t - 1 and
        y_lag1, plus the target 'y'. Row order is chronological.
    """
    rng = np.random.default_rng(scn.seed)
    inputs = rng.random((scn.n_samples + 1, N_INPUTS))
    noise = rng.normal(0.0, scn.noise_sd, size=scn.n_samples)

    x_now, x_prev = inputs[1:], inputs[:-1]
    target = (target_function(x_now, x_prev,
                              lambda_schedule(scn, 1),
                              lambda_schedule(scn, 2))
              + noise)

    features = np.column_stack([x_now[1:], x_prev[1:], target[:-1]])
    logger.debug("Generated %s scenario with %d rows", scn.kind, len(features))
    return from_arrays(features, target[1:], FEATURE_NAMES, target_name=TARGET_NAME)


# Scenario catalogues #
#---------------------#

def scenario_grid(kind: str, **overrides) -> list[ShiftScenario]:
    """
    All 81 coefficient combinations, in lexicographic order over the
    grids (first: -10, -4, 10, -25). 'overrides' are passed to every
    ShiftScenario (n_samples, seed, ...).
    """
    return [ShiftScenario(l1a, l1b, l2a, l2b, kind=kind, **overrides)
            for l1a, l1b, l2a, l2b in itertools.product(LAMBDA1_A_GRID, LAMBDA1_B_GRID,
                                                         LAMBDA2_A_GRID, LAMBDA2_B_GRID)]


def case_scenario(case: int, kind: str, **overrides) -> ShiftScenario:
    """One of the three representative settings (1: strong, 3: weak)."""
    check_choice(case, "case", tuple(CASES))
    return ShiftScenario(*CASES[case], kind=kind, **overrides)


# Metadata sidecar #
#------------------#

def write_scenario_metadata(scn: ShiftScenario, path: str | Path) -> str:
    """Write every ShiftScenario field as 'key=value'."""
    return write_key_value_file(path, asdict(scn))


def read_scenario_metadata(path: str | Path) -> ShiftScenario:
    items = read_key_value_file(path)
    casts = {f.name: f.type for f in fields(ShiftScenario)}
    unknown = sorted(set(items) - set(casts))
    if unknown:
        raise ValueError(format_string(UNKNOWN_METADATA_KEY_TEMPLATE, (unknown,)))
    kwargs = {}
    for key, value in items.items():
        kwargs[key] = casts[key](value)
    return ShiftScenario(**kwargs)

#--------------------------#
# Parameters and constants #
#--------------------------#

SHIFT_KINDS = ("sudden", "incremental", "none")
N_INPUTS = 10
RAMP_DENOMINATOR = 10000

TARGET_NAME = "y"
FEATURE_NAMES = ([f"x{i:02d}" for i in range(1, N_INPUTS + 1)]
                 + [f"x{i:02d}_lag1" for i in range(1, N_INPUTS + 1)]
                 + [f"{TARGET_NAME}_lag1"])

LAMBDA1_A_GRID = (-10.0, -1.0, -0.1)
LAMBDA1_B_GRID = (-4.0, -0.4, -0.04)
LAMBDA2_A_GRID = (10.0, 1.0, 0.1)
LAMBDA2_B_GRID = (-25.0, -2.5, -0.25)

CASES = {
    1: (-10.0, -4.0, 10.0, -25.0),
    2: (-1.0, -0.4, 1.0, -2.5),
    3: (-0.1, -0.04, 0.1, -0.25),
}

# Error strings #
#---------------#

BREAK_INDEX_ERROR_TEMPLATE = "break_index ({}) must be smaller than n_samples ({})."
RAMP_ERROR_TEMPLATE = "break_index ({}) + ramp_len ({}) exceeds n_samples ({})."
INDEX_ERROR_TEMPLATE = "Index {} outside [0, {})."
UNKNOWN_METADATA_KEY_TEMPLATE = "Unknown scenario key(s): {}"
