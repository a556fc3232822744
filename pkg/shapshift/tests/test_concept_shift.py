import numpy as np
import pytest

from shapshift.synthetic import concept_shift as cs
from shapshift.synthetic.concept_shift import ShiftScenario


def test_sudden_schedule_switches_at_the_break():
    scn = cs.case_scenario(1, "sudden")

    assert cs.lambda_at(scn, 1, 19999) == -10.0
    assert cs.lambda_at(scn, 1, 20000) == -4.0
    assert cs.lambda_at(scn, 2, 0) == 10.0
    assert cs.lambda_at(scn, 2, 29999) == -25.0
    schedule = cs.lambda_schedule(scn, 2)
    assert set(schedule[:20000].tolist()) == {10.0}
    assert set(schedule[20000:].tolist()) == {-25.0}


def test_incremental_schedule_uses_the_fixed_denominator():
    scn = ShiftScenario(-1.0, -0.4, 1.0, -2.5, kind="incremental")

    assert cs.lambda_at(scn, 1, 20000) == -1.0
    assert cs.lambda_at(scn, 1, 22500) == pytest.approx(-0.85, abs=1e-12)
    # the ramp ends halfway and jumps to the final value
    assert cs.lambda_at(scn, 1, 24999) == pytest.approx(-0.70006, abs=1e-12)
    assert cs.lambda_at(scn, 1, 25000) == -0.4

    schedule = cs.lambda_schedule(scn, 1)
    assert schedule[[19999, 20000, 22500, 25000]].tolist() == pytest.approx([-1.0, -1.0, -0.85, -0.4])
    points = [0, 19999, 20001, 24999, 25000, 29999]
    assert schedule[points].tolist() == [cs.lambda_at(scn, 1, i) for i in points]


def test_lambda_at_rejects_indices_outside_the_scenario():
    scn = cs.case_scenario(2, "sudden")

    with pytest.raises(IndexError, match="outside"):
        cs.lambda_at(scn, 1, 30000)
    with pytest.raises(IndexError, match="outside"):
        cs.lambda_at(scn, 1, -1)


def test_scenario_checks():
    with pytest.raises(ValueError, match="must be smaller than n_samples"):
        ShiftScenario(0.0, 0.0, 0.0, 0.0, n_samples=100, break_index=100)
    with pytest.raises(ValueError, match="exceeds n_samples"):
        ShiftScenario(0.0, 0.0, 0.0, 0.0, kind="incremental", n_samples=100,
                      break_index=60, ramp_len=50)
    with pytest.raises(ValueError, match="Unsupported value"):
        ShiftScenario(0.0, 0.0, 0.0, 0.0, kind="gradual")


def test_scenario_grid():
    grid = cs.scenario_grid("sudden", n_samples=500, break_index=300)

    assert len(grid) == 81
    first = grid[0]
    assert (first.lambda1_a, first.lambda1_b, first.lambda2_a, first.lambda2_b) == (-10.0, -4.0, 10.0, -25.0)
    assert any((s.lambda1_a, s.lambda1_b, s.lambda2_a, s.lambda2_b) == (-0.1, -0.04, 0.1, -0.25)
               for s in grid)
    assert {s.n_samples for s in grid} == {500}


def test_generate_shape_and_determinism():
    scn = ShiftScenario(-10.0, -4.0, 10.0, -25.0, n_samples=400, break_index=250, seed=3)

    ds = cs.generate(scn)

    assert ds.n_rows == 399
    assert ds.n_features == 21
    assert "x05_lag1" in ds.feature_names and "y_lag1" in ds.feature_names
    inputs = ds.features[:, [j for j, name in enumerate(ds.feature_names) if name != "y_lag1"]]
    assert inputs.min() >= 0.0 and inputs.max() <= 1.0
    assert np.isfinite(ds.target).all()
    assert ds.column("y_lag1")[1:].tolist() == ds.target[:-1].tolist()

    again = cs.generate(scn)
    assert np.array_equal(again.features, ds.features)
    assert np.array_equal(again.target, ds.target)


def test_noise_free_generation_follows_the_formula():
    scn = ShiftScenario(0.0, 0.0, 0.0, 0.0, n_samples=200, break_index=100, noise_sd=0.0, seed=8)

    ds = cs.generate(scn)

    def half(suffix):
        x = {i: ds.column(f"x0{i}{suffix}") for i in (1, 3, 4)}
        return 2 * x[1] + 3 * np.sin(2 * np.pi * x[3]) - 0.4 * x[4]

    assert ds.target == pytest.approx(half("") + half("_lag1"), abs=1e-12)


def test_dataset_row_r_holds_sample_r_plus_one():
    scn = ShiftScenario(-10.0, -4.0, 10.0, -25.0, n_samples=200, break_index=100, noise_sd=0.0, seed=3)

    ds = cs.generate(scn)
    x_now = np.column_stack([ds.column(f"x{i:02d}") for i in range(1, 11)])
    x_prev = np.column_stack([ds.column(f"x{i:02d}_lag1") for i in range(1, 11)])
    samples = np.arange(1, scn.n_samples)
    expected = cs.target_function(x_now, x_prev,
                                  cs.lambda_schedule(scn, 1)[samples],
                                  cs.lambda_schedule(scn, 2)[samples])

    assert ds.target == pytest.approx(expected, abs=1e-12)
    # the last unshifted sample is row 98, the first shifted one row 99
    last_before = cs.target_function(x_now[98], x_prev[98], -10.0, 10.0)
    first_after = cs.target_function(x_now[99], x_prev[99], -4.0, -25.0)
    assert ds.target[98] == pytest.approx(last_before[0], abs=1e-12)
    assert ds.target[99] == pytest.approx(first_after[0], abs=1e-12)
    assert ds.column("y_lag1")[1:] == pytest.approx(ds.target[:-1], abs=0)


def test_zero_inputs_give_a_zero_target():
    zeros = np.zeros((3, 10))
    assert cs.target_function(zeros, zeros, -10.0, 10.0).tolist() == [0.0, 0.0, 0.0]


def test_scenario_metadata_round_trip(tmp_path):
    scn = ShiftScenario(-0.1, -0.04, 0.1, -0.25, kind="incremental", n_samples=1000,
                        break_index=500, ramp_len=300, noise_sd=0.05, seed=4)

    path = cs.write_scenario_metadata(scn, tmp_path / "meta")

    assert cs.read_scenario_metadata(path) == scn


def test_scenario_metadata_rejects_unknown_keys(tmp_path):
    path = tmp_path / "meta.txt"
    path.write_text("lambda1_a=0.0\ncolour=red\n", encoding="utf-8")

    with pytest.raises(ValueError, match="Unknown scenario key"):
        cs.read_scenario_metadata(path)
