import os

import numpy as np
import pandas as pd
import pytest

from shapshift.cli.main import build_parser, main
from shapshift.cli.run_config import load_config
from shapshift.synthetic.concept_shift import case_scenario, write_scenario_metadata

SMALL_SYNTH = ["--kind", "sudden", "--case", "1", "--n-samples", "300", "--break-index", "200"]
SMALL_MODEL = ["--n-trees", "10", "--learning-rate", "0.3", "--max-depth", "3", "--min-samples-leaf", "5"]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("SHAPSHIFT_"):
            monkeypatch.delenv(name)


def _toy_csv(tmp_path, n_rows=160):
    rng = np.random.default_rng(0)
    frame = pd.DataFrame({"a": rng.random(n_rows), "b": rng.random(n_rows),
                          "c": rng.random(n_rows), "flat": np.full(n_rows, 1.0)})
    frame["y"] = 3 * frame["a"] + frame["b"] ** 2 + 0.05 * rng.normal(size=n_rows)
    path = tmp_path / "toy.csv"
    frame.to_csv(path, index=False)
    return str(path)


def test_synth_writes_the_scenario_and_is_repeatable(tmp_path):
    out = tmp_path / "out"

    assert main(["synth", *SMALL_SYNTH, "--dir", str(out)]) == 0
    first = (out / "scenario.csv").read_bytes()
    assert main(["synth", *SMALL_SYNTH, "--dir", str(out)]) == 0

    frame = pd.read_csv(out / "scenario.csv")
    assert frame.shape == (299, 22)
    assert "y" in frame.columns
    assert (out / "scenario.csv").read_bytes() == first
    assert "kind=sudden" in (out / "scenario_meta.txt").read_text(encoding="utf-8")


def test_invalid_kind_exits_with_2(tmp_path, capsys):
    assert main(["synth", "--scenario", "gradual", "--dir", str(tmp_path)]) == 2
    assert "synth.kind" in capsys.readouterr().err


def test_reversed_quantiles_exit_with_2(tmp_path, capsys):
    code = main(["select", "--q-low", "0.9", "--q-high", "0.1", "--dir", str(tmp_path)])

    assert code == 2
    assert "q_low must be smaller than q_high" in capsys.readouterr().err


@pytest.mark.parametrize("args, message", [
    (["select", "--split.mode", "random", "--split.fractions", "0.5,0.6,0.2"], "split.fractions"),
    (["select", "--n-samples", "200", "--break-index", "150"], "exceeds the number of rows (199)"),
    (["bench", "--k", "99"], "bench.k (99) exceeds the number of features (21)"),
], ids=["fractions", "synthetic-split-size", "synthetic-k"])
def test_bad_split_and_bench_settings_exit_with_2(tmp_path, capsys, args, message):
    assert main([*args, "--dir", str(tmp_path)]) == 2
    assert message in capsys.readouterr().err


def test_settings_too_large_for_the_csv_exit_with_2(tmp_path, capsys):
    data = _toy_csv(tmp_path)

    assert main(["select", "--path", data, "--n-train", "150", "--n-val", "40",
                 "--dir", str(tmp_path)]) == 2
    assert "exceeds the number of rows (160)" in capsys.readouterr().err
    assert main(["bench", "--path", data, "--n-train", "100", "--n-val", "40", "--k", "9",
                 "--dir", str(tmp_path)]) == 2
    assert "bench.k (9) exceeds the number of features (4)" in capsys.readouterr().err


def test_missing_config_file_exits_with_2(tmp_path):
    assert main(["select", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_missing_data_file_is_a_runtime_failure(tmp_path, capsys):
    code = main(["select", "--path", str(tmp_path / "absent.csv"), "--dir", str(tmp_path)])

    assert code == 1
    assert "'select' failed" in capsys.readouterr().err


def test_unknown_flag_is_rejected_by_the_parser():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["select", "--q-lo", "0.2"])


def test_select_then_report(tmp_path, capsys):
    out = tmp_path / "out"
    args = ["select", "--path", _toy_csv(tmp_path), "--n-train", "100", "--n-val", "40",
            "--n-iter-prev", "0", *SMALL_MODEL, "--dir", str(out), "--parsimony-tol", "0.5"]

    assert main(args) == 0

    trace_lines = (out / "trace.csv").read_text(encoding="utf-8").splitlines()
    assert trace_lines[0] == "iteration,n_features,removed,removal_kind,metric_value"
    first = trace_lines[1].split(",")
    assert first[:2] == ["1", "4"]
    assert "flat" in first[2].split(";")
    assert first[3] == "infinite-sweep"
    selected = (out / "selected_features.txt").read_text(encoding="utf-8").split()
    assert selected == sorted(selected)
    assert "flat" not in selected
    assert trace_lines[-1].split(",")[2] == ";".join(selected)
    assert (out / "parsimonious_features.txt").exists()
    effective = load_config(out / "run.cfg", {})
    assert effective["split.n_train"] == 100
    assert effective["selector.n_iter_prev"] == 0
    write_scenario_metadata(case_scenario(1, "sudden"), out / "scenario_meta.txt")

    capsys.readouterr()
    assert main(["report", "--dir", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "infinite-sweep" in printed
    assert "Best MAE" in printed
    assert "Scenario: sudden shift, lambdas (-10.0, -4.0, 10.0, -25.0)" in printed


def test_shap_verifies_its_output(tmp_path):
    out = tmp_path / "out"
    model_path = tmp_path / "model"
    args = ["shap", "--path", _toy_csv(tmp_path), "--n-train", "100", "--n-val", "40",
            *SMALL_MODEL, "--dir", str(out), "--verify", "--verify-exact",
            "--save-model", str(model_path)]

    assert main(args) == 0

    frame = pd.read_csv(out / "shap.csv")
    assert list(frame.columns) == ["row_index", "a", "b", "c", "flat", "base_value", "prediction"]
    assert frame["row_index"].tolist() == list(range(100, 140))
    assert (frame["flat"] == 0.0).all()
    summed = frame[["a", "b", "c", "flat"]].sum(axis=1) + frame["base_value"]
    assert np.abs(summed - frame["prediction"]).max() < 1e-8

    again = ["shap", "--path", _toy_csv(tmp_path), "--n-train", "100", "--n-val", "40",
             "--model", str(model_path) + ".txt", "--dir", str(tmp_path / "again")]
    assert main(again) == 0
    assert (tmp_path / "again" / "shap.csv").read_bytes() == (out / "shap.csv").read_bytes()


def test_bench_writes_table_and_per_seed_rows(tmp_path):
    out = tmp_path / "out"
    args = ["bench", "--path", _toy_csv(tmp_path), "--n-train", "100", "--n-val", "40",
            "--n-iter-prev", "0", *SMALL_MODEL, "--seeds", "1,2", "--k", "2",
            "--algorithms", "topk_shap,keep_all", "--dir", str(out), "--per-seed"]

    assert main(args) == 0

    table = (out / "bench_table.csv").read_text(encoding="utf-8").splitlines()
    assert table[0].startswith("algorithm,n_features,mae_mean,mae_std")
    assert [line.split(",")[:2] for line in table[1:]] == [["topk_shap", "2"], ["keep_all", "4"]]
    per_seed = pd.read_csv(out / "bench_per_seed.csv")
    assert per_seed.shape == (4, 5)

    first = (out / "bench_table.csv").read_bytes()
    assert main(args) == 0
    assert (out / "bench_table.csv").read_bytes() == first
