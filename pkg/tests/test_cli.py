import csv
import json
import shutil
import subprocess
from pathlib import Path

import pytest

from graphindex.cli import main

EXAMPLES = Path(__file__).resolve().parents[1] / "docs" / "examples"


def test_two_star_segment_passes(capsys):
    assert main(["verify", "two-star", "--mA", "1", "--mB", "1", "--d", "1", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "iMor - mu_CLM = -1 (expected -1) PASS" in out


def test_star_formula_failure_sets_exit_code(capsys):
    code = main(["verify", "star", "--m", "3", "--d", "2", "--seed", "0"])
    out = capsys.readouterr().out
    assert code == 1
    assert "iMor - mu_CLM = -4 (expected -3) FAIL" in out


def test_star_formula_passes_when_m_equals_d(capsys):
    assert main(["verify", "star", "--m", "2", "--d", "2", "--seed", "1"]) == 0


def test_json_report_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["verify", "two-star", "--mA", "1", "--mB", "1", "--d", "1", "--seed", "2"]
    assert main(args + ["--json", str(a)]) == 0
    assert main(args + ["--json", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["schema"] == 1
    assert "conventions" in doc
    assert doc["run"]["seeds"] == [2]
    assert doc["reports"][0]["provenance"]["seed"] == 2


def test_invalid_graph_exits_two(capsys):
    code = main(["graph", "validate", str(EXAMPLES / "bad_infinity_degree.json")])
    err = capsys.readouterr().err
    assert code == 2
    assert "vertex at infinity 'inf' has degree 2 (must be 1)" in err


def test_valid_graph(capsys):
    assert main(["graph", "validate", "--graph", str(EXAMPLES / "star3.json")]) == 0


@pytest.mark.parametrize("argv", [
    ["verify", "star", "--m", "0"],
    ["verify", "star", "--mesh-n", "-3"],
    ["index", "morse"],
    ["nls", "residual", "--mass", "0"],
    ["bogus"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_thread_cap_must_be_integer(monkeypatch, capsys):
    monkeypatch.setenv("GRAPHINDEX_THREADS", "x")
    assert main(["verify", "two-star", "--seed", "0"]) == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mesh-n": 16, "seed": 1}))
    out = tmp_path / "r.json"
    assert main(["verify", "two-star", "--config", str(cfg), "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["run"]["mesh_n"] == 16
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["verify", "two-star", "--config", str(bad)]) == 2


def test_index_commands(tmp_path, capsys):
    seg = str(EXAMPLES / "segment.json")
    assert main(["index", "morse", "--graph", seg]) == 0
    assert main(["index", "maslov", "--graph", seg]) == 0
    table = tmp_path / "sf.csv"
    assert main(["index", "sf", "--graph", seg, "--csv", str(table)]) == 0
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["s", "count_below"]
    out = capsys.readouterr().out
    assert "2" in out


def test_sf_formula_on_example_graph(capsys):
    code = main(["verify", "sf-formula", "--graph", str(EXAMPLES / "leaf_half_line.json"),
                 "--seed", "0"])
    assert code == 0


def test_nls_residual(tmp_path, capsys):
    out = tmp_path / "res.json"
    assert main(["nls", "residual", "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["quantities"]["omega"] == pytest.approx(1 / 16)


def test_nls_groundstate_writes_profile_and_trace(tmp_path, capsys):
    prof = tmp_path / "phi.csv"
    assert main(["nls", "groundstate", "--csv", str(prof)]) == 0
    assert prof.exists() and (tmp_path / "phi_energy.csv").exists()
    assert "Morse index = 1" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("graphindex") is None, reason="console script not installed")
def test_console_script_exit_code():
    done = subprocess.run(["graphindex", "verify", "star", "--m", "3", "--d", "2", "--seed", "0"],
                          capture_output=True, text=True)
    assert done.returncode == 1
