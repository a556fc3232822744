import os

import pytest

from shapshift.data_handling import file_io


def test_write_text_atomic_appends_extension_and_creates_parents(tmp_path):
    target = tmp_path / "nested" / "dir" / "table"

    written = file_io.write_text_atomic(target, "a,b\n", extension="csv")

    assert written == str(target) + ".csv"
    with open(written, encoding="utf-8") as file_obj:
        assert file_obj.read() == "a,b\n"
    assert os.listdir(tmp_path / "nested" / "dir") == ["table.csv"]


def test_write_text_atomic_fallback_delete_recreate_when_replace_fails(tmp_path, monkeypatch):
    out_file = tmp_path / "out.txt"
    file_io.write_text_atomic(out_file, "first\n")

    monkeypatch.setattr(file_io.os, "replace", lambda src, dst: (_ for _ in ()).throw(OSError("replace failed")))

    file_io.write_text_atomic(out_file, "second\n")
    assert out_file.read_text(encoding="utf-8") == "second\n"
    # the temporary file is always cleaned up
    assert os.listdir(tmp_path) == ["out.txt"]


def test_key_value_file_round_trip_keeps_float_text(tmp_path):
    path = file_io.write_key_value_file(tmp_path / "meta", {"kind": "sudden",
                                                            "noise_sd": 0.1,
                                                            "n_samples": 30000})

    assert path.endswith("meta.txt")
    assert file_io.read_key_value_file(path) == {"kind": "sudden",
                                                 "noise_sd": "0.1",
                                                 "n_samples": "30000"}


def test_read_key_value_file_skips_comments_and_rejects_malformed_lines(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text("# comment\n\nselector.q_low = 0.2\n", encoding="utf-8")
    assert file_io.read_key_value_file(good) == {"selector.q_low": "0.2"}

    bad = tmp_path / "bad.cfg"
    bad.write_text("selector.q_low 0.2\n", encoding="utf-8")
    with pytest.raises(ValueError, match="Malformed line"):
        file_io.read_key_value_file(bad)

    with pytest.raises(FileNotFoundError):
        file_io.read_key_value_file(tmp_path / "missing.cfg")


def test_format_scalar_uses_shortest_round_trip_text():
    assert file_io.format_scalar(0.1 + 0.2) == "0.30000000000000004"
    assert file_io.format_scalar((1.0, -2.5)) == "1.0,-2.5"
    assert file_io.format_scalar(3) == "3"
