#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#----------------#
# Import modules #
#----------------#

import math

import numpy as np
from sklearn.metrics import mean_absolute_error, mean_squared_error, r2_score

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.general.validation_utils import check_choice

#------------------#
# Define functions #
#------------------#

def compute_metric(y_true, y_pred, metric: str = "MAE") -> float:
    """
    Regression score of 'y_pred' against 'y_true'.

    Parameters
    ----------
    y_true, y_pred : array-like
        Equal, non-zero lengths.
    metric : {"MAE", "MSE", "RMSE", "R2"}

    Returns
    -------
    float

    Raises
    ------
    ValueError
        On an unknown metric, a length mismatch, empty input, or a
        constant 'y_true' under R2.
    """
    check_choice(metric, "metric", METRIC_CHOICES)
    y_true = np.asarray(y_true, dtype=np.float64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if len(y_true) != len(y_pred) or len(y_true) == 0:
        raise ValueError(format_string(LENGTH_ERROR_TEMPLATE, (len(y_true), len(y_pred))))

    if metric == "MAE":
        return float(mean_absolute_error(y_true, y_pred))
    if metric == "MSE":
        return float(mean_squared_error(y_true, y_pred))
    if metric == "RMSE":
        return math.sqrt(mean_squared_error(y_true, y_pred))
    if np.ptp(y_true) == 0:
        raise ValueError(CONSTANT_TARGET_R2_ERROR)
    return float(r2_score(y_true, y_pred))


def higher_is_better(metric: str) -> bool:
    return check_choice(metric, "metric", METRIC_CHOICES) == "R2"


def is_improvement(candidate: float, incumbent: float, metric: str) -> bool:
    """True if 'candidate' is strictly better than 'incumbent' (NaN never is)."""
    if math.isnan(candidate):
        return False
    if math.isnan(incumbent):
        return True
    return candidate > incumbent if higher_is_better(metric) else candidate < incumbent

#--------------------------#
# Parameters and constants #
#--------------------------#

METRIC_CHOICES = ("MAE", "MSE", "RMSE", "R2")

# Error strings #
#---------------#

LENGTH_ERROR_TEMPLATE = "y_true and y_pred need equal, non-zero lengths, got {} and {}."
CONSTANT_TARGET_R2_ERROR = "R2 is undefined for a constant y_true."
