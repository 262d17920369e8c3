"""Tests for the command line interface."""

from __future__ import annotations

import json

import pytest

from minmax_surfaces import __version__
from minmax_surfaces.__main__ import main
from minmax_surfaces.const import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME

DISK = {"mode": "planar2d", "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]}}


def write(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_validate_config(tmp_path, capsys):
    path = write(tmp_path / "ok.json", {"name": "disk", "domain": DISK})
    assert main(["validate-config", "--config", path]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["name"] == "disk"
    assert printed["family"]["builder"] == "level_set"


def test_validate_config_errors(tmp_path, capsys):
    path = write(tmp_path / "bad.json", {"name": "disk", "domain": DISK, "plateau": {"inner": 0.3, "outer": 0.1}})
    assert main(["validate-config", "--config", path]) == EXIT_CONFIG
    assert "plateau/inner" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert main(["validate-config", "--config", str(broken)]) == EXIT_CONFIG
    assert main(["validate-config", "--config", write(tmp_path / "list.json", [1])]) == EXIT_CONFIG


def test_run_with_bad_config(tmp_path):
    path = write(tmp_path / "bad.json", {"domain": DISK})
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_comb_test(capsys):
    assert main(["comb-test", "--seed", "2", "--instances", "5"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]


def test_plot(tmp_path):
    csv_path = tmp_path / "profile.csv"
    csv_path.write_text("t,mass\n0.0,1.0\n0.5,2.0\n1.0,1.0\n", encoding="utf-8")
    svg = tmp_path / "plots" / "profile.svg"
    assert main(["plot", "--csv", str(csv_path), "--out", str(svg)]) == EXIT_OK
    text = svg.read_text(encoding="utf-8")
    assert text.startswith("<svg")
    assert "profile" in text


def test_plot_of_a_missing_file(tmp_path):
    assert main(["plot", "--csv", str(tmp_path / "none.csv"), "--out", str(tmp_path / "x.svg")]) == EXIT_RUNTIME


def test_diagnose_stored_family(tmp_path, capsys):
    # a diameter between two point slices of the disk
    slices = [
        {"vertices": [[-1.0, 0.0]], "bc": "trivial"},
        {"vertices": [[0.0, -1.0], [0.0, -0.5], [0.0, 0.0], [0.0, 0.5], [0.0, 1.0]], "bc": "free"},
        {"vertices": [[1.0, 0.0]], "bc": "trivial"},
    ]
    lines = [json.dumps({"mode": "unconstrained", "shape": [3]})]
    lines += [json.dumps({"index": [i], "slice": s}) for i, s in enumerate(slices)]
    family = tmp_path / "slices.jsonl"
    family.write_text("\n".join(lines) + "\n", encoding="utf-8")
    config = write(tmp_path / "disk.json", {"name": "disk", "domain": DISK, "mode": "unconstrained"})
    out = tmp_path / "diag"
    assert main(["diagnose", "--slices", str(family), "--config", config, "--out", str(out)]) == EXIT_OK
    result = json.loads((out / "diagnose.json").read_text(encoding="utf-8"))
    assert result["t"] == [1]
    assert result["mass"] == pytest.approx(2.0)
    assert result["density"][0]["theta"] == pytest.approx(1.0)
    assert json.loads(capsys.readouterr().out)["mass"] == pytest.approx(2.0)
