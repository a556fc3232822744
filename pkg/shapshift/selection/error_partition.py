#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Error-driven scoring of features.

Validation errors are split into correctly (CP), over (OP) and under (UP)
predicted rows by a quantile band that is translated when the model is
biased. Each feature's signed, squared attributions are then summed per
group, and the group sums decide how much the feature hurts the model.
"""

#----------------#
# Import modules #
#----------------#

from dataclasses import dataclass

import numpy as np

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

from shapshift.attribution.shapley import ShapMatrix
from shapshift.general.validation_utils import check_real

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class QuantilePair:
    """Lower and upper quantile levels, 0 <= q_low < q_high <= 1."""
    q_low: float
    q_high: float

    def __post_init__(self):
        check_real(self.q_low, "q_low", low=0.0, high=1.0)
        check_real(self.q_high, "q_high", low=0.0, high=1.0)
        if not self.q_low < self.q_high:
            raise ValueError(format_string(QUANTILE_ORDER_ERROR_TEMPLATE,
                                           (self.q_low, self.q_high)))

    def __str__(self) -> str:
        return f"({self.q_low}, {self.q_high})"


@dataclass(frozen=True)
class ErrorPartition:
    errors: np.ndarray
    q_star: float
    Q_star: float
    Q_low: float
    Q_high: float
    Q_low_star: float
    Q_high_star: float
    labels: np.ndarray
    median_err: float

    @property
    def width(self) -> float:
        return self.Q_high_star - self.Q_low_star

    def group_sizes(self) -> dict[str, int]:
        return {label: int((self.labels == label).sum()) for label in GROUP_LABELS}


@dataclass(frozen=True)
class GroupEffects:
    """Per-feature sums of sgn(phi) * phi^2 over the CP, OP and UP rows."""
    feature_names: tuple
    ef_cp: np.ndarray
    ef_op: np.ndarray
    ef_up: np.ndarray


@dataclass(frozen=True)
class NegInfluence:
    """
    Per-feature negative influence, in [0, inf]. 'branches' records which
    rule produced each value (1: no effect, 2: over-prediction bias,
    3: under-prediction bias, 4: pushes both error groups the wrong way,
    5: none of the above).
    """
    feature_names: tuple
    values: np.ndarray
    branches: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_names, self.values.tolist()))

#------------------#
# Define functions #
#------------------#

# Quantiles #
#-----------#

def empirical_quantile(values: np.ndarray, q: float) -> float:
    """
    Linear interpolation between order statistics: with v sorted and
    h = (n - 1) q, the result is v[floor(h)] + (h - floor(h)) (v[ceil(h)] - v[floor(h)]).
    """
    return float(np.quantile(values, q, method="linear"))


# Error classification #
#----------------------#

def classify_errors(errors, q: QuantilePair) -> ErrorPartition:
    """
    Split validation errors into CP, OP and UP rows.

    Parameters
    ----------
    errors : array-like
        err = y - y_hat for every validation row (at least 2).
    q : QuantilePair

    Returns
    -------
    ErrorPartition
        With Q_low and Q_high the error quantiles at q_low and q_high,
        q_star the share of errors <= 0 and Q_star its quantile, the band
        [Q_low_star, Q_high_star] is

        - [Q_low, Q_high] when 0 lies in it,
        - [Q_star, Q_high - (Q_low - Q_star)] when Q_high < 0,
        - [Q_low - (Q_high - Q_star), Q_star] when Q_low > 0,

        so its width never changes. Rows inside the band are CP, rows
        above it UP and rows below it OP.

    Raises
    ------
    ValueError
        If fewer than 2 errors are given or any is not finite.
    """
    errors = np.asarray(errors, dtype=np.float64).reshape(-1)
    if len(errors) < 2:
        raise ValueError(format_string(TOO_FEW_ERRORS_TEMPLATE, (len(errors),)))
    if not np.isfinite(errors).all():
        raise ValueError(NON_FINITE_ERRORS_ERROR)

    Q_low = empirical_quantile(errors, q.q_low)
    Q_high = empirical_quantile(errors, q.q_high)
    q_star = float((errors <= 0).sum() / len(errors))
    Q_star = empirical_quantile(errors, q_star)

    if Q_low <= 0 <= Q_high:
        Q_low_star, Q_high_star = Q_low, Q_high
    elif Q_high < 0:
        Q_low_star, Q_high_star = Q_star, Q_high - (Q_low - Q_star)
    else:
        Q_low_star, Q_high_star = Q_low - (Q_high - Q_star), Q_star

    labels = np.full(len(errors), "CP", dtype="<U2")
    labels[errors < Q_low_star] = "OP"
    labels[errors > Q_high_star] = "UP"

    return ErrorPartition(errors=errors,
                          q_star=q_star,
                          Q_star=Q_star,
                          Q_low=Q_low,
                          Q_high=Q_high,
                          Q_low_star=Q_low_star,
                          Q_high_star=Q_high_star,
                          labels=labels,
                          median_err=empirical_quantile(errors, 0.5))


# Effects #
#---------#

def effect_per_obs(shap_value):
    """sgn(phi) * phi^2, element-wise for arrays."""
    return np.sign(shap_value) * np.square(shap_value)


def group_effects(shap: ShapMatrix, partition: ErrorPartition) -> GroupEffects:
    """
    Sum the per-row effects of every feature within each error group.
    Empty groups contribute 0.

    Raises
    ------
    ValueError
        If the attribution rows and the partition labels differ in number.
    """
    if shap.explained_rows != len(partition.labels):
        raise ValueError(format_string(ROW_MISALIGNMENT_ERROR_TEMPLATE,
                                       (shap.explained_rows, len(partition.labels))))
    effects = effect_per_obs(shap.values)
    sums = {label: effects[partition.labels == label].sum(axis=0) for label in GROUP_LABELS}
    return GroupEffects(feature_names=shap.feature_names,
                        ef_cp=sums["CP"],
                        ef_op=sums["OP"],
                        ef_up=sums["UP"])


# Negative influence #
#--------------------#

def negative_influence(ge: GroupEffects,
                       median_err: float,
                       zero_tolerance: float = 0.0) -> NegInfluence:
    """
    Score how much each feature pushes the errors the wrong way.

    The first matching rule wins:

    1. |ef_cp| + |ef_op| + |ef_up| <= zero_tolerance -> +inf
    2. median < 0, ef_op > 0, ef_up > 0, |ef_op| > |ef_up| + |ef_cp|
       -> |ef_op| - (|ef_up| + |ef_cp|)
    3. median > 0, ef_op > 0, ef_up > 0, |ef_up| > |ef_op| + |ef_cp|
       -> |ef_up| - (|ef_op| + |ef_cp|)
    4. ef_op > 0, ef_up < 0, |ef_up| + |ef_op| > |ef_cp|
       -> |ef_up| + |ef_op| - |ef_cp|
    5. otherwise -> 0

    With a median error of exactly 0 only rules 1, 4 and 5 can fire.
    """
    check_real(zero_tolerance, "zero_tolerance", low=0.0)
    median_err = check_real(median_err, "median_err")
    cp, op, up = (np.asarray(arr, dtype=np.float64) for arr in (ge.ef_cp, ge.ef_op, ge.ef_up))
    abs_cp, abs_op, abs_up = np.abs(cp), np.abs(op), np.abs(up)

    conditions = [
        abs_cp + abs_op + abs_up <= zero_tolerance,
        (median_err < 0) & (op > 0) & (up > 0) & (abs_op > abs_up + abs_cp),
        (median_err > 0) & (op > 0) & (up > 0) & (abs_up > abs_op + abs_cp),
        (op > 0) & (up < 0) & (abs_up + abs_op > abs_cp),
    ]
    choices = [
        np.full(len(cp), np.inf),
        abs_op - (abs_up + abs_cp),
        abs_up - (abs_op + abs_cp),
        abs_up + abs_op - abs_cp,
    ]
    values = np.select(conditions, choices, default=0.0)
    branches = np.select(conditions, [1, 2, 3, 4], default=5)
    return NegInfluence(feature_names=ge.feature_names, values=values, branches=branches)

#--------------------------#
# Parameters and constants #
#--------------------------#

GROUP_LABELS = ("CP", "OP", "UP")

# Error strings #
#---------------#

QUANTILE_ORDER_ERROR_TEMPLATE = "q_low must be smaller than q_high, got ({}, {})."
TOO_FEW_ERRORS_TEMPLATE = "Need at least 2 errors to build a partition, got {}."
NON_FINITE_ERRORS_ERROR = "Errors must be finite."
ROW_MISALIGNMENT_ERROR_TEMPLATE = "Attributions cover {} rows but the partition labels {}."
