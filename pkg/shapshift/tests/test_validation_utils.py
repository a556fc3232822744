import numpy as np
import pytest

from shapshift.general import validation_utils as vu


def test_check_int_accepts_numpy_integers_and_returns_python_int():
    value = vu.check_int(np.int64(7), "n_trees", minimum=0)

    assert value == 7
    assert type(value) is int


def test_check_int_rejects_bool_and_float():
    with pytest.raises(TypeError, match="'flag' must be of type 'int'"):
        vu.check_int(True, "flag")
    with pytest.raises(TypeError, match="got 'float'"):
        vu.check_int(1.0, "count")


def test_check_int_enforces_minimum():
    with pytest.raises(ValueError, match="'max_depth' must be an integer >= 1, got 0"):
        vu.check_int(0, "max_depth", minimum=1)


def test_check_real_converts_and_checks_open_bounds():
    assert vu.check_real(1, "rate", low=0.0, high=1.0, low_inclusive=False) == 1.0

    with pytest.raises(ValueError, match=r"must lie in \(0.0, 1.0\]"):
        vu.check_real(0.0, "rate", low=0.0, high=1.0, low_inclusive=False)


def test_check_real_rejects_non_finite_values():
    with pytest.raises(ValueError, match="must be finite"):
        vu.check_real(float("nan"), "noise_sd")
    with pytest.raises(ValueError, match="must be finite"):
        vu.check_real(np.inf, "noise_sd")


def test_check_choice_lists_the_options():
    assert vu.check_choice("MAE", "metric", ("MAE", "R2")) == "MAE"
    with pytest.raises(ValueError, match=r"Choose one from \['MAE', 'R2'\]"):
        vu.check_choice("MAPE", "metric", ("MAE", "R2"))
