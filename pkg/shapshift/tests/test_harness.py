import math

import numpy as np
import pytest

from shapshift.attribution.shapley import global_influence, tree_shap
from shapshift.benchmarking import harness
from shapshift.benchmarking.harness import MetricSummary
from shapshift.data_handling.dataset import concat_rows, from_arrays, split_chronological, split_views
from shapshift.models.gbdt import GbdtParams, fit
from shapshift.selection.error_partition import QuantilePair
from shapshift.selection.selector import SelectorParams
from shapshift.synthetic.concept_shift import ShiftScenario

SMALL = GbdtParams(n_trees=15, learning_rate=0.3, max_depth=3, min_samples_leaf=5)


def _views(seed=0, n_rows=240):
    rng = np.random.default_rng(seed)
    features = np.column_stack([rng.random(n_rows), rng.random(n_rows),
                                rng.random(n_rows), np.full(n_rows, 2.0), rng.random(n_rows)])
    target = 3 * features[:, 0] + features[:, 1] ** 2 + 0.5 * features[:, 4] + 0.05 * rng.normal(size=n_rows)
    ds = from_arrays(features, target, ["a", "b", "c", "d", "e"])
    return split_views(ds, split_chronological(ds, 150, 50))


def _table_kwargs(**overrides):
    kwargs = dict(quantile_grid=[QuantilePair(0.1, 0.9)],
                  selector_params=SelectorParams(n_iter_prev=0, model_params=SMALL),
                  seeds=(1, 2),
                  lambdas=(0.01,))
    kwargs.update(overrides)
    return kwargs


def test_single_seed_summary_has_no_spread():
    train, val, test = _views()
    train_val = concat_rows(train, val)

    summary = harness.evaluate(["b", "a"], train_val, test, SMALL, seeds=[7], algorithm="pair")

    assert summary.feature_set == ("a", "b")
    assert summary.n_features == 2
    mean, std, high, low = summary.stats("mae")
    assert std == 0.0
    assert low == mean == high


def test_seed_independent_fits_give_zero_std_and_recomputable_stats():
    train, val, test = _views()
    train_val = concat_rows(train, val)

    summary = harness.evaluate(["a", "b", "e"], train_val, test, SMALL, seeds=[1, 2, 3])

    assert summary.stats("rmse")[1] == 0.0
    for metric in harness.SUMMARY_METRICS:
        values = getattr(summary, metric)
        assert summary.stats(metric) == pytest.approx(
            (values.mean(), values.std(), values.max(), values.min()), abs=1e-12)


def test_subsampled_evaluation_varies_with_the_seed():
    train, val, test = _views()
    train_val = concat_rows(train, val)
    params = GbdtParams(n_trees=15, learning_rate=0.3, max_depth=3, min_samples_leaf=5, subsample=0.5)

    summary = harness.evaluate(["a", "b"], train_val, test, params, seeds=[1, 2, 3])

    low, mean, high = summary.stats("mae")[3], summary.mean("mae"), summary.stats("mae")[2]
    assert low <= mean <= high
    assert len(set(summary.mae.tolist())) > 1


def test_evaluate_input_errors():
    train, val, test = _views()

    with pytest.raises(ValueError, match="At least one evaluation seed"):
        harness.evaluate(["a"], train, test, SMALL, seeds=[])
    with pytest.raises(ValueError, match="empty feature set"):
        harness.evaluate([], train, test, SMALL, seeds=[1])
    with pytest.raises(KeyError):
        harness.evaluate(["zz"], train, test, SMALL, seeds=[1])


def test_topk_baseline_follows_the_influence_ranking():
    train, val, _ = _views()

    ranked = harness.baseline_topk_shap(train, val, SMALL, k=3)
    influence = global_influence(tree_shap(fit(train, SMALL), val))
    order = sorted(range(5), key=lambda j: (-influence[j], train.feature_names[j]))

    assert ranked == [train.feature_names[j] for j in order[:3]]
    assert ranked[0] == "a"
    full = harness.baseline_topk_shap(train, val, SMALL, k=5)
    assert sorted(full) == ["a", "b", "c", "d", "e"]
    assert full[-1] == "d"
    with pytest.raises(ValueError, match="exceeds the number of features"):
        harness.baseline_topk_shap(train, val, SMALL, k=6)


def test_small_table_rows_and_determinism():
    train, val, test = _views()

    summaries = harness.run_table(train, val, test, **_table_kwargs())
    again = harness.run_table(train, val, test, **_table_kwargs())

    assert [s.algorithm for s in summaries] == ["shapeffects_0.1_0.9", "topk_shap", "lasso_0.01", "keep_all"]
    assert summaries[-1].n_features == 5
    assert summaries[1].n_features == summaries[0].n_features
    assert "d" not in summaries[0].feature_set
    assert harness.table_to_text(summaries) == harness.table_to_text(again)


def test_empty_selection_gives_a_nan_row(tmp_path):
    train, val, test = _views()

    summaries = harness.run_table(train, val, test,
                                  **_table_kwargs(algorithms=["lasso", "keep_all"], lambdas=(1e3,), k=2))
    path = harness.write_table_csv(summaries, tmp_path / "table")

    with open(path, encoding="utf-8") as file_obj:
        lines = file_obj.read().splitlines()
    assert lines[0] == ("algorithm,n_features,mae_mean,mae_std,mae_max,mae_min,"
                        "rmse_mean,rmse_std,rmse_max,rmse_min,r2_mean,r2_std,r2_max,r2_min")
    assert lines[1] == "lasso_1000.0,0," + ",".join(["nan"] * 12)
    assert lines[2].startswith("keep_all,5,")


def test_run_table_argument_checks():
    train, val, test = _views()

    with pytest.raises(ValueError, match="non-empty test set"):
        harness.run_table(train, val, None)
    with pytest.raises(ValueError, match="Unsupported value"):
        harness.run_table(train, val, test, algorithms=["boruta"])
    with pytest.raises(ValueError, match="needs the 'shapeffects' rows"):
        harness.run_grid("sudden", 100, 50, algorithms=["keep_all"])


def _summary(label, mae_values, n_features=2):
    mae = np.asarray(mae_values, dtype=float)
    return MetricSummary(algorithm=label, feature_set=tuple("abcdef"[:n_features]),
                         seeds=tuple(range(1, len(mae) + 1)), mae=mae, rmse=mae * 2, r2=1 - mae)


def test_grid_comparison_and_file(tmp_path):
    scn = ShiftScenario(-10.0, -4.0, 10.0, -25.0)
    summaries = [_summary("shapeffects_0.25_0.75", [2.0, 2.0]),
                 _summary("shapeffects_0.1_0.9", [1.0, 1.5]),
                 _summary("keep_all", [2.0, 2.5], n_features=5)]

    comparison = harness.compare_to_best_shapeffects(scn, summaries)
    path = harness.write_grid_csv([comparison], tmp_path / "grid")

    assert comparison.best_algorithm == "shapeffects_0.1_0.9"
    assert comparison.best_mae == 1.25
    assert comparison.differences == {"keep_all": 1.0}
    with open(path, encoding="utf-8") as file_obj:
        assert file_obj.read().splitlines() == [
            "lambda1_a,lambda1_b,lambda2_a,lambda2_b,best_algorithm,best_mae,diff_keep_all",
            "-10.0,-4.0,10.0,-25.0,shapeffects_0.1_0.9,1.25,1.0",
        ]


def test_grid_comparison_without_usable_shapeffects_rows():
    scn = ShiftScenario(-1.0, -0.4, 1.0, -2.5)
    summaries = [_summary("shapeffects_0.1_0.9", [math.nan]), _summary("keep_all", [1.0])]

    comparison = harness.compare_to_best_shapeffects(scn, summaries)

    assert comparison.best_algorithm == ""
    assert math.isnan(comparison.differences["keep_all"])


def test_per_seed_file(tmp_path):
    path = harness.write_per_seed_csv([_summary("keep_all", [0.5, 0.25])], tmp_path / "seeds")

    with open(path, encoding="utf-8") as file_obj:
        assert file_obj.read().splitlines() == ["algorithm,seed,mae,rmse,r2",
                                                "keep_all,1,0.5,1.0,0.5",
                                                "keep_all,2,0.25,0.5,0.75"]
