import numpy as np
import pandas as pd
import pytest

from shapshift.attribution import shapley
from shapshift.attribution.shapley import CoalitionValueSpec, ShapMatrix
from shapshift.data_handling.dataset import from_arrays
from shapshift.models.gbdt import GbdtParams, fit, predict


def _dataset(seed, n_rows=150, n_features=5):
    rng = np.random.default_rng(seed)
    features = rng.random((n_rows, n_features))
    target = (2 * features[:, 0]
              + np.where(features[:, 1] > 0.5, features[:, 2], -features[:, 2])
              + 0.3 * rng.normal(size=n_rows))
    names = [f"f{j}" for j in range(n_features)]
    return from_arrays(features, target, names)


def _small_model(seed):
    return fit(_dataset(seed), GbdtParams(n_trees=5, learning_rate=0.5, max_depth=3, min_samples_leaf=3))


def test_attributions_add_up_to_predictions():
    ds = _dataset(0, n_rows=400)
    model = fit(ds, GbdtParams(n_trees=60, max_depth=4, min_samples_leaf=5))

    shap = shapley.tree_shap(model, ds)
    prediction = predict(model, ds)

    assert shap.values.shape == (400, 5)
    assert shap.base_value == pytest.approx(shapley.expected_value(model))
    bound = np.maximum(1e-8, 1e-8 * np.abs(prediction))
    assert (np.abs(shap.predictions() - prediction) < bound).all()


@pytest.mark.parametrize("seed", range(8))
def test_tree_shap_matches_coalition_enumeration(seed):
    ds = _dataset(seed)
    model = _small_model(seed)

    shap = shapley.tree_shap(model, ds.features[:6])

    for row in range(6):
        exact = shapley.exact_shapley(model, ds.features[row])
        assert np.abs(shap.values[row] - exact).max() < 1e-10


def test_unused_feature_gets_zero_attribution():
    rng = np.random.default_rng(3)
    signal = rng.random(200)
    ds = from_arrays(np.column_stack([signal, np.full(200, 4.0)]), signal ** 2, ["s", "z"])
    model = fit(ds, GbdtParams(n_trees=10, max_depth=2, min_samples_leaf=5))

    shap = shapley.tree_shap(model, ds)

    assert shap.values[:, 1].tolist() == [0.0] * 200
    assert shapley.global_influence(shap)[0] > 0


def test_tree_shap_accepts_named_rows_in_any_column_order():
    ds = _dataset(1)
    model = _small_model(1)
    frame = ds.to_frame()[["f4", "f3", "f2", "f1", "f0"]]

    assert np.array_equal(shapley.tree_shap(model, frame).values,
                          shapley.tree_shap(model, ds).values)


def test_sampling_estimate_is_efficient_and_close_to_exact():
    ds = _dataset(2)
    model = _small_model(2)
    row = ds.features[0]

    exact = shapley.exact_shapley(model, row)
    estimate, stderr = shapley.sampling_shapley(model, row, n_permutations=4000, seed=11,
                                                return_stderr=True)

    # every ordering telescopes to v(all) - v(empty)
    assert estimate.sum() == pytest.approx(exact.sum(), abs=1e-10)
    within = np.abs(estimate - exact) <= 3 * stderr + 1e-9
    assert within.sum() >= 4


def test_sampling_is_seeded_and_single_permutation_has_no_stderr():
    ds = _dataset(4)
    model = _small_model(4)
    row = ds.features[3]

    first = shapley.sampling_shapley(model, row, n_permutations=50, seed=9)
    second = shapley.sampling_shapley(model, row, n_permutations=50, seed=9)
    assert np.array_equal(first, second)

    _, stderr = shapley.sampling_shapley(model, row, n_permutations=1, return_stderr=True)
    assert np.isnan(stderr).all()


def test_interventional_game_explains_the_gap_to_the_background():
    ds = _dataset(5)
    model = _small_model(5)
    row, reference = ds.features[0], ds.features[1:2]

    phi = shapley.exact_shapley(model, row, CoalitionValueSpec("background_interventional", reference))

    gap = predict(model, row.reshape(1, -1))[0] - predict(model, reference)[0]
    assert phi.sum() == pytest.approx(gap, abs=1e-10)


def test_coalition_spec_and_estimator_limits():
    with pytest.raises(ValueError, match="non-empty background"):
        CoalitionValueSpec("background_interventional")
    with pytest.raises(ValueError, match="Unsupported value"):
        CoalitionValueSpec("marginal")

    wide = _dataset(6, n_features=16)
    model = fit(wide, GbdtParams(n_trees=2, max_depth=2, min_samples_leaf=5))
    with pytest.raises(ValueError, match="at most 15"):
        shapley.exact_shapley(model, wide.features[0])
    with pytest.raises(ValueError, match="single row"):
        shapley.exact_shapley(_small_model(0), _dataset(0).features[:2])


def test_global_influence_is_mean_absolute_value():
    shap = ShapMatrix(values=[[1.0, -2.0], [-3.0, 0.0]], base_value=0.0, feature_names=("a", "b"))

    assert shapley.global_influence(shap).tolist() == [2.0, 1.0]
    with pytest.raises(ValueError, match="at least one explained row"):
        shapley.global_influence(ShapMatrix(values=np.zeros((0, 2)), base_value=0.0,
                                            feature_names=("a", "b")))


def test_write_shap_csv(tmp_path):
    shap = ShapMatrix(values=[[0.5, -0.25]], base_value=1.0, feature_names=("a", "b"))

    path = shapley.write_shap_csv(shap, tmp_path / "shap", [1.5], row_indices=[42])
    frame = pd.read_csv(path)

    assert list(frame.columns) == ["row_index", "a", "b", "base_value", "prediction"]
    # the prediction column is the model output, not base + sum of attributions
    assert frame.iloc[0].tolist() == [42, 0.5, -0.25, 1.0, 1.5]
    with pytest.raises(ValueError, match="2 predictions for 1 explained rows"):
        shapley.write_shap_csv(shap, tmp_path / "bad", [1.5, 2.0])


def test_shap_csv_prediction_column_is_the_model_output(tmp_path):
    ds = _dataset(4, n_rows=60)
    model = _small_model(4)
    shap = shapley.tree_shap(model, ds)
    prediction = predict(model, ds)

    frame = pd.read_csv(shapley.write_shap_csv(shap, tmp_path / "shap", prediction),
                        float_precision="round_trip")

    assert np.array_equal(frame["prediction"].to_numpy(), prediction)
    summed = frame[list(shap.feature_names)].sum(axis=1) + frame["base_value"]
    assert np.abs(summed - frame["prediction"]).max() < 1e-8
