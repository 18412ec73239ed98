from __future__ import annotations

import json
import subprocess
import sys

import pytest

from _cli_inputs import commands, snapshot, write_inputs
from coarsekit.cli import main


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    return write_inputs(tmp_path_factory.mktemp("inputs"))


def run(argv, out):
    return main([*argv, "--out", str(out)])


@pytest.mark.parametrize("index", range(12))
def test_command_is_byte_deterministic(inputs, tmp_path, index):
    argv = commands(inputs)[index]
    assert run(argv, tmp_path / "a") == 0
    assert run(argv, tmp_path / "b") == 0
    a, b = snapshot(tmp_path / "a"), snapshot(tmp_path / "b")
    assert a and a == b


def test_outputs_have_expected_content(inputs, tmp_path):
    assert run(["sparsify", inputs["instance.json"]], tmp_path) == 0
    doc = json.loads((tmp_path / "sparsify.json").read_text())
    assert doc["D_achieved"] == 1 and doc["verdict"] == "FEASIBLE"
    assert run(["roundtrip", inputs["maps.json"], "--block-diameter", "1"], tmp_path) == 0
    rows = (tmp_path / "roundtrip.csv").read_text().splitlines()
    assert rows[0].startswith("index,") and len(rows) == 4
    assert all(int(r.split(",")[1]) <= int(r.split(",")[3]) for r in rows[1:])
    assert run(["cover", inputs["U.json"], inputs["f.json"]], tmp_path) == 0
    assert json.loads((tmp_path / "cover.json").read_text())["certificate"]["C"] <= 1
    assert run(["gen-space", "cayley:Z2", "2"], tmp_path) == 0
    assert (tmp_path / "cayley-Z2-2.json").exists()


def test_malformed_input_exits_2(inputs, tmp_path, capsys):
    assert run(["gen-space", "bogus", "3"], tmp_path) == 2
    assert run(["profile", inputs["broken.json"]], tmp_path) == 2
    assert run(["extract-map", inputs["bad.json"]], tmp_path) == 2
    assert run(["cover", inputs["bad.json"], "--block-diameter", "0"], tmp_path) == 2
    assert run(["cover", inputs["f.json"]], tmp_path) == 2
    assert run(["profile", str(tmp_path / "missing.json")], tmp_path) == 2
    assert "error:" in capsys.readouterr().err


def test_pipeline_rejection_exits_3(inputs, tmp_path, capsys):
    assert run(["roundtrip", inputs["const.json"]], tmp_path) == 3
    report = json.loads(capsys.readouterr().err)
    assert report["kind"] == "CoveringError" and report["obstruction"]["index"] == 8
    assert not (tmp_path / "roundtrip.json").exists()
    assert run(["extract-map", inputs["U.json"], "--c", "0.99"], tmp_path) == 0  # negative verdict, not a rejection
    assert json.loads((tmp_path / "extract-map.json").read_text())["verdict"] == "UNCERTIFIED"
    assert run(["extract-map", inputs["U.json"], "--support", "--tol-support", "0.99"], tmp_path) == 3


def test_module_entry_point(inputs, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "coarsekit", "sparsify", inputs["instance.json"],
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip().endswith("sparsify.json")
    bad = subprocess.run([sys.executable, "-m", "coarsekit", "gen-space", "bogus", "3", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode == 2
