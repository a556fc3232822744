#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#----------------#
# Import modules #
#----------------#

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.preprocessing import MinMaxScaler

#------------------------#
# Import project modules #
#------------------------#

from shapshift.data_handling.dataset import Dataset
from shapshift.general.validation_utils import check_int, check_real

logger = logging.getLogger(__name__)

#----------------#
# Define classes #
#----------------#

@dataclass(frozen=True)
class LassoParams:
    lam: float
    max_sweeps: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        check_real(self.lam, "lambda", low=0.0)
        check_int(self.max_sweeps, "max_sweeps", minimum=1)
        check_real(self.tol, "tol", low=0.0, low_inclusive=False)


@dataclass(frozen=True)
class LassoResult:
    """
    Coefficients live in min-max normalised feature space. Constant
    features are excluded before the fit and get coefficient 0.
    """
    feature_names: tuple
    coefficients: np.ndarray
    intercept: float
    converged: bool
    n_sweeps: int
    lam: float

    @property
    def selected(self) -> list[str]:
        return [name for name, coef in zip(self.feature_names, self.coefficients) if coef != 0]

#------------------#
# Define functions #
#------------------#

# Solver #
#--------#

def soft_threshold(rho: float, lam: float) -> float:
    """sign(rho) * max(|rho| - lam, 0)."""
    return float(np.sign(rho) * max(abs(rho) - lam, 0.0))


def coordinate_descent(x: np.ndarray, y: np.ndarray, params: LassoParams):
    """
    Minimise (1 / 2n) ||y - x b||^2 + lam ||b||_1 by cyclic coordinate
    descent. 'x' and 'y' must be centred, so no intercept is fitted here.

    Returns
    -------
    tuple[numpy.ndarray, bool, int]
        Coefficients, whether the largest coefficient change of the last
        sweep fell below 'tol', and the number of sweeps run.
    """
    n_rows, n_cols = x.shape
    coef = np.zeros(n_cols)
    if n_cols == 0:
        return coef, True, 0

    col_norm = np.square(x).sum(axis=0) / n_rows
    residual = y.copy()
    for sweep in range(1, params.max_sweeps + 1):
        max_change = 0.0
        for j in range(n_cols):
            if col_norm[j] == 0.0:
                continue
            old = coef[j]
            rho = x[:, j] @ residual / n_rows + col_norm[j] * old
            coef[j] = soft_threshold(rho, params.lam) / col_norm[j]
            if coef[j] != old:
                residual -= x[:, j] * (coef[j] - old)
                max_change = max(max_change, abs(coef[j] - old))
        if max_change < params.tol:
            return coef, True, sweep
    return coef, False, params.max_sweeps


def kkt_gap(x: np.ndarray, y: np.ndarray, coef: np.ndarray, lam: float) -> float:
    """
    Largest violation of the subgradient optimality conditions of the
    centred problem: gradient equals lam * sign(b_j) on the support and
    stays within [-lam, lam] elsewhere.
    """
    if x.shape[1] == 0:
        return 0.0
    gradient = x.T @ (y - x @ coef) / len(y)
    on_support = coef != 0
    gap = np.where(on_support,
                   np.abs(gradient - lam * np.sign(coef)),
                   np.maximum(np.abs(gradient) - lam, 0.0))
    return float(gap.max())


# Feature selection #
#-------------------#

def normalised_design(train: Dataset):
    """
    Min-max scaled, centred design matrix of the non-constant features.

    Returns
    -------
    tuple
        (centred design, centred target, mask of the non-constant columns,
        column means of the scaled features before centring)
    """
    varying = np.ptp(train.features, axis=0) > 0
    scaled = MinMaxScaler().fit_transform(train.features[:, varying]) if varying.any() \
        else np.zeros((train.n_rows, 0))
    column_means = scaled.mean(axis=0)
    x = scaled - column_means
    y = train.target - train.target.mean()
    return x, y, varying, column_means


def lasso_select(train: Dataset, params: LassoParams) -> LassoResult:
    """
    L1-penalised linear fit on min-max normalised features.

    Features with a non-zero coefficient are selected. Non-convergence
    within 'max_sweeps' is reported through 'converged' (and a warning),
    not raised; the partial solution is returned.
    """
    x, y, varying, column_means = normalised_design(train)
    coef_varying, converged, n_sweeps = coordinate_descent(x, y, params)
    if not converged:
        logger.warning("Lasso (lambda=%g) did not converge in %d sweeps",
                       params.lam, params.max_sweeps)

    coefficients = np.zeros(train.n_features)
    coefficients[varying] = coef_varying
    intercept = float(train.target.mean() - column_means @ coef_varying)
    return LassoResult(feature_names=train.feature_names,
                       coefficients=coefficients,
                       intercept=intercept,
                       converged=converged,
                       n_sweeps=n_sweeps,
                       lam=params.lam)


def lasso_sweep(train: Dataset,
                lambdas=None,
                max_sweeps: int = 1000,
                tol: float = 1e-6) -> list[LassoResult]:
    """One 'lasso_select' per penalty, in the order given."""
    lambdas = LASSO_LAMBDA_GRID if lambdas is None else lambdas
    return [lasso_select(train, LassoParams(lam=lam, max_sweeps=max_sweeps, tol=tol))
            for lam in lambdas]

#--------------------------#
# Parameters and constants #
#--------------------------#

LASSO_LAMBDA_GRID = (0.01, 0.001, 0.0001, 0.00001)
