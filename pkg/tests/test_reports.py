"""Cell formatting and run manifest behaviour."""

import json
import math

import pytest

from qadvantage.reports import RunWriter, format_cell, sha256_of


class TestFormatCell:
    def test_passthrough_and_sentinels(self):
        assert format_cell(None) == ""
        assert format_cell("label") == "label"
        assert format_cell(True) == "true"
        assert format_cell(False) == "false"
        assert format_cell(7) == "7"

    def test_floats(self):
        assert format_cell(3.0) == "3"
        assert format_cell(0.25) == "0.25"
        assert format_cell(float("nan")) == "nan"
        assert format_cell(float("inf")) == "inf"
        # ten significant digits for non-integral values
        assert format_cell(math.pi) == "3.141592654"

    def test_large_integral_float_stays_exact(self):
        assert format_cell(2.08e14) == "208000000000000"


class TestRunWriter:
    def test_manifest_lists_all_outputs_with_hashes(self, tmp_path):
        writer = RunWriter(tmp_path / "run")
        writer.write_csv("a.csv", ["x", "y"], [[1, 2], [3, 4]], comments=["note"])
        writer.write_keyvalue("b.csv", {"k": 1.5})
        writer.finalize(command="fit", config_digest="abc", seeds=(0, 1))
        manifest = json.loads((tmp_path / "run" / "run_manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["seeds"] == [0, 1]
        assert manifest["status"] == "ok"
        names = [entry["name"] for entry in manifest["outputs"]]
        assert names == ["a.csv", "b.csv"]
        for entry in manifest["outputs"]:
            path = tmp_path / "run" / entry["name"]
            assert entry["sha256"] == sha256_of(path)
            assert entry["bytes"] == path.stat().st_size
        text = (tmp_path / "run" / "a.csv").read_text()
        assert text.startswith("# note\nx,y\n1,2\n3,4\n")

    def test_row_width_mismatch_rejected(self, tmp_path):
        writer = RunWriter(tmp_path)
        with pytest.raises(ValueError, match="width"):
            writer.write_csv("bad.csv", ["x", "y"], [[1]])
