import json

import pytest

from icansim.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

SMALL = ["--snapshots", "2", "--ues", "10"]


def test_run_csv_and_summarize(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", *SMALL, "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("snapshot,ue_id,scheme")
    assert len(lines) == 1 + 2 * 10 * 4
    assert main(["summarize", str(out), "--brief"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "BH-8" in text and "TMCB/BH n=8" in text


def test_run_json_scheme_and_seed(tmp_path):
    out = tmp_path / "r.json"
    assert main(["run", *SMALL, "--scheme", "tmcb", "--seed", "7", "--format", "json",
                 "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert {r["scheme"] for r in doc["rows"]} == {"TMCB"}
    assert doc["config"]["seed"] == 7


def test_run_svg(tmp_path):
    out = tmp_path / "r.svg"
    assert main(["run", *SMALL, "--format", "svg", "--out", str(out)]) == EXIT_OK
    assert out.read_text().count("<polyline") == 4


def test_run_stdout_and_override(capsys):
    assert main(["run", "--snapshots", "1", "--ues", "2", "--set", "min_elevation=20"]) == 0
    assert capsys.readouterr().out.startswith("snapshot,")


def test_geometry(capsys):
    assert main(["geometry", "--num-sats", "4"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "sat_id,beam_index,lat,lon,color,role,active"
    assert len(lines) == 1 + 4 * 61


def test_crlb(capsys):
    assert main(["crlb", "--ue", "3", "--snapshot", "1", "--scheme", "tmcb"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "status ok" in out and "FIM" in out and "3D: crlb" in out


def test_oracle(capsys):
    assert main(["oracle", "--cases", "2", "--trials", "500"]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 3


@pytest.mark.parametrize("argv", [
    ["run", "--set", "shell.altitude=-1"],
    ["run", "--set", "noequals"],
    ["run", "--set", "shell.bogus=1"],
    ["crlb", "--snapshot", "500"],
    ["crlb", "--ue", "9999"],
])
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_io_errors(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_IO
    assert main(["run", "--snapshots", "1", "--ues", "1",
                 "--out", str(tmp_path / "no" / "x.csv")]) == EXIT_IO
    assert main(["summarize", str(tmp_path / "nope.csv")]) == EXIT_IO
