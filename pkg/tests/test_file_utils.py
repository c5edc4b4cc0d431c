import json

import numpy as np
from pandas import DataFrame as DF

from bec_walk_library.file_utils import (
    check_if_file_exists,
    csv_text,
    filename_is_blank,
    json_text,
    make_dir_if_not_exists,
    results_to_csv,
    results_to_json,
)


def test_csv_text_keeps_full_precision():
    text = csv_text(DF({"position_index": [-1, 1], "probability": [0.1, 0.9]}))

    assert text == "position_index,probability\n-1,0.10000000000000001\n1,0.90000000000000002\n"


def test_json_text_is_sorted_and_plain():
    text = json_text({"b": np.float64(0.5), "a": np.arange(3), "c": {"flag": np.bool_(True)}})

    assert text.endswith("\n")
    assert list(json.loads(text)) == ["a", "b", "c"]
    assert json.loads(text) == {"a": [0, 1, 2], "b": 0.5, "c": {"flag": True}}


def test_results_to_csv_creates_folder(tmp_path):
    folder = tmp_path / "nested" / "results"
    path = results_to_csv(DF({"n": [1, 2]}), "walk_distribution.csv", str(folder))

    assert check_if_file_exists(path) == path
    with open(path, encoding="utf-8") as handle:
        assert handle.read() == "n\n1\n2\n"


def test_results_to_json(tmp_path):
    path = results_to_json({"schema_version": 1}, "walk_summary.json", str(tmp_path))

    with open(path, encoding="utf-8") as handle:
        assert json.load(handle) == {"schema_version": 1}


def test_check_if_file_exists(tmp_path):
    assert check_if_file_exists(str(tmp_path / "absent.csv")) is False
    assert check_if_file_exists(str(tmp_path / "no_dir" / "absent.csv")) is False
    assert check_if_file_exists(str(tmp_path) + "/") is False


def test_filename_is_blank():
    assert filename_is_blank("")
    assert not filename_is_blank("walk_summary.json")


def test_make_dir_if_not_exists_is_idempotent(tmp_path):
    folder = tmp_path / "out"
    make_dir_if_not_exists(str(folder))
    make_dir_if_not_exists(str(folder))

    assert folder.is_dir()
