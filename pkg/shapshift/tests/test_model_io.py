import numpy as np
import pytest

from shapshift.data_handling.dataset import from_arrays
from shapshift.models.gbdt import GbdtParams, ModelFormatError, fit, predict
from shapshift.models.model_io import load_model, model_from_text, model_to_text, save_model


def _model():
    rng = np.random.default_rng(7)
    features = rng.random((200, 3))
    ds = from_arrays(features, features[:, 0] ** 2 - features[:, 2] / 3, ["u", "v", "w"])
    return ds, fit(ds, GbdtParams(n_trees=8, max_depth=3, min_samples_leaf=10))


def test_saved_model_loads_back_exactly(tmp_path):
    ds, model = _model()

    path = save_model(model, tmp_path / "model")
    loaded = load_model(path)

    assert path.endswith("model.txt")
    assert loaded.feature_names == ("u", "v", "w")
    assert model_to_text(loaded) == model_to_text(model)
    assert np.array_equal(predict(loaded, ds), predict(model, ds))


def test_header_layout():
    _, model = _model()

    lines = model_to_text(model).splitlines()

    assert lines[0] == f"base_score={model.base_score!r}"
    assert lines[2] == "feature_names=u;v;w"
    assert lines[3] == "n_trees=8"
    assert lines[4] == f"tree 0 {model.trees[0].n_nodes}"
    assert lines[5].split()[1] == "split"


def test_truncated_text_is_rejected():
    _, model = _model()
    text = model_to_text(model)

    with pytest.raises(ModelFormatError, match="ends before"):
        model_from_text("\n".join(text.splitlines()[:-1]))
    with pytest.raises(ModelFormatError, match="ends before 'n_trees'"):
        model_from_text("\n".join(text.splitlines()[:3]))


def test_cover_tampering_is_rejected():
    _, model = _model()
    lines = model_to_text(model).splitlines()
    fields = lines[5].split()
    fields[6] = str(int(fields[6]) + 1)
    lines[5] = " ".join(fields)

    with pytest.raises(ModelFormatError, match="cover"):
        model_from_text("\n".join(lines))


def test_bad_node_lines_are_rejected():
    text = ("base_score=0.0\nlearning_rate=0.1\nfeature_names=a\nn_trees=1\n"
            "tree 0 1\n0 split -1 0.0 -1 -1 3 1.0\n")
    with pytest.raises(ModelFormatError, match="does not match its feature index"):
        model_from_text(text)

    with pytest.raises(ModelFormatError, match="needs 8 fields"):
        model_from_text(text.replace("0 split -1 0.0 -1 -1 3 1.0", "0 leaf -1 0.0 -1 -1 3"))

    with pytest.raises(ModelFormatError, match="Unexpected content"):
        model_from_text(text.replace("split", "leaf") + "extra line\n")


def test_missing_model_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="Model file not found"):
        load_model(tmp_path / "absent.txt")
