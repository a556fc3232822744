#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#----------------#
# Import modules #
#----------------#

import math
import numbers
from typing import Any

#------------------------#
# Import project modules #
#------------------------#

from pygenutils.strings.text_formatters import format_string

#------------------#
# Define functions #
#------------------#

# Object types #
#--------------#

def get_type_str(obj: Any, lowercase: bool = False) -> str:
    """Class name of 'obj', as used in the type-error messages below."""
    name = type(obj).__name__
    return name.lower() if lowercase else name


# Scalar argument checks #
#------------------------#

def check_int(value: Any, name: str, minimum: int | None = None) -> int:
    """
    Validate that 'value' is an integer (booleans excluded),
    optionally bounded from below.

    Parameters
    ----------
    value : Any
        Object to validate.
    name : str
        Argument or field name used in the error message.
    minimum : int | None, optional
        Smallest admissible value. Defaults to None (no bound).

    Returns
    -------
    int
        The validated value.

    Raises
    ------
    TypeError
        If 'value' is not an integer.
    ValueError
        If 'value' is below 'minimum'.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(format_string(TYPE_ERROR_TEMPLATE,
                                      (name, "int", get_type_str(value))))
    if minimum is not None and value < minimum:
        raise ValueError(format_string(BELOW_MINIMUM_ERROR_TEMPLATE,
                                       (name, minimum, value)))
    return int(value)


def check_real(value: Any,
               name: str,
               low: float | None = None,
               high: float | None = None,
               low_inclusive: bool = True,
               high_inclusive: bool = True) -> float:
    """
    Validate that 'value' is a finite real number inside an optional interval.

    Parameters
    ----------
    value : Any
        Object to validate. Integers are accepted and converted to float.
    name : str
        Argument or field name used in the error message.
    low, high : float | None, optional
        Interval bounds. None means unbounded on that side.
    low_inclusive, high_inclusive : bool, optional
        Whether each bound belongs to the admissible interval. Default True.

    Returns
    -------
    float
        The validated value as a float.

    Raises
    ------
    TypeError
        If 'value' is not a real number.
    ValueError
        If 'value' is not finite or falls outside the interval.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(format_string(TYPE_ERROR_TEMPLATE,
                                      (name, "float", get_type_str(value))))
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(format_string(NON_FINITE_ERROR_TEMPLATE, (name, value)))

    below = low is not None and (value < low if low_inclusive else value <= low)
    above = high is not None and (value > high if high_inclusive else value >= high)
    if below or above:
        left_bracket = "[" if low_inclusive else "("
        right_bracket = "]" if high_inclusive else ")"
        interval = (f"{left_bracket}{'-inf' if low is None else low}, "
                    f"{'+inf' if high is None else high}{right_bracket}")
        raise ValueError(format_string(OUT_OF_RANGE_ERROR_TEMPLATE,
                                       (name, interval, value)))
    return value


def check_choice(value: Any, name: str, options: list | tuple) -> Any:
    """
    Validate that 'value' is one of the admissible 'options'.

    Raises
    ------
    ValueError
        If 'value' is not in 'options'.
    """
    if value not in options:
        raise ValueError(format_string(UNSUPPORTED_OPTION_ERROR_TEMPLATE,
                                       (value, name, list(options))))
    return value

#--------------------------#
# Parameters and constants #
#--------------------------#

# Error strings #
#---------------#

TYPE_ERROR_TEMPLATE = "'{}' must be of type '{}', got '{}'."
BELOW_MINIMUM_ERROR_TEMPLATE = "'{}' must be an integer >= {}, got {}."
NON_FINITE_ERROR_TEMPLATE = "'{}' must be finite, got {}."
OUT_OF_RANGE_ERROR_TEMPLATE = "'{}' must lie in {}, got {}."
UNSUPPORTED_OPTION_ERROR_TEMPLATE = "Unsupported value '{}' for '{}'. Choose one from {}."
