"""Tests for the phase pipeline of a scenario run."""

from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import chord
from minmax_surfaces.config_flow import ScenarioConfigFlow
from minmax_surfaces.const import ENV_OUTPUT_DIR, PHASE_BUILD, PHASES
from minmax_surfaces.coordinator import MinMaxCoordinator, gamma_trace, probe_point, resolve_output_dir, run_scenario
from minmax_surfaces.exceptions import PhaseError
from minmax_surfaces.geometry import disk_mesh
from minmax_surfaces.scenarios import catenoid_seed
from minmax_surfaces.sweepout import BoundaryCondition, Slice

SMALL_DISK = {
    "name": "small-disk",
    "domain": {"mode": "planar2d", "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]}},
    "mode": "unconstrained",
    "family": {"resolution": 129, "n_vertices": 17, "refine": False},
    "tighten": {"max_iters": 5},
    "amin": {"schedule": [1], "steps": 20, "starts": 1},
    "plateau": {"enabled": False},
    "diagnostics": {"spectrum_count": 3},
    "expect": {"m0": 2.0, "m0_rtol": 1e-3, "max_orthogonality_defect": 1e-4},
}


def validated(user_input):
    config, errors = ScenarioConfigFlow.validate(user_input)
    assert errors == {}, errors
    return config


def test_resolve_output_dir(monkeypatch, tmp_path):
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    assert resolve_output_dir({}) == resolve_output_dir({"output_dir": None}) == resolve_output_dir({}, None)
    assert resolve_output_dir({"output_dir": "runs/a"}).as_posix() == "runs/a"
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "env"))
    assert resolve_output_dir({"output_dir": "runs/a"}) == tmp_path / "env"
    assert resolve_output_dir({"output_dir": "runs/a"}, tmp_path / "cli") == tmp_path / "cli"


def test_probe_point():
    np.testing.assert_allclose(probe_point(chord((-1.0, 0.0), (1.0, 0.0), n=5)), [0.0, 0.0])
    vertices, faces = disk_mesh(0.5, 0.2, 2, 8)
    np.testing.assert_allclose(probe_point(Slice(vertices, faces, BoundaryCondition.FREE)), [0.0, 0.0, 0.2], atol=1e-12)


def test_gamma_trace(constrained_disk, ball):
    assert gamma_trace(constrained_disk, chord((-1.0, 0.0), (1.0, 0.0)))["passed"]
    assert not gamma_trace(constrained_disk, chord((-1.0, 0.0), (0.0, 1.0)))["passed"]
    # both ends on one gamma point leave the other uncovered
    hairpin = Slice(np.array([[-1.0, 0.0], [0.0, 0.5], [-1.0, 0.0]]), bc=BoundaryCondition.CONSTRAINED)
    trace = gamma_trace(constrained_disk, hairpin)
    assert trace["distance"] == pytest.approx(0.0) and not trace["passed"]
    doubled = Slice(chord((-1.0, 0.0), (1.0, 0.0)).vertices, None, BoundaryCondition.CONSTRAINED, 2)
    assert not gamma_trace(constrained_disk, doubled)["passed"]
    assert gamma_trace(ball, catenoid_seed(ball, "stable", n_profile=21, n_theta=32))["passed"]


@pytest.mark.filterwarnings("ignore::minmax_surfaces.exceptions.BudgetTooSmall")
def test_small_disk_run(tmp_path):
    report = run_scenario(validated(SMALL_DISK), tmp_path)
    assert report.passed, [a.to_dict() for a in report.assertions]
    assert [a.name for a in report.assertions] == ["m0", "orthogonality", "covering"]
    assert report.critical["mass"] == pytest.approx(2.0, abs=1e-6)
    assert report.critical["t"] == [64]
    assert list(report.timings) == PHASES
    assert report.certificates[0]["certified"]
    assert report.freezes == []
    assert report.replacement is None
    assert report.diagnostics["spectrum"]["index"] == 1
    assert report.diagnostics["density"][0]["theta"] == pytest.approx(1.0)
    assert "oracle" not in report.diagnostics

    written = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert written["passed"]
    assert written["name"] == "small-disk"
    for name in (
        "initial_slices.jsonl",
        "slices.jsonl",
        "trace.csv",
        "profile.csv",
        "density.csv",
        "plots/profile.svg",
        "plots/trace.svg",
        "plots/density.svg",
        "plots/critical.svg",
    ):
        assert name in report.artifacts
        assert (tmp_path / name).exists()


def test_failing_phase_is_reported(tmp_path):
    # level-set sweepouts are unconstrained
    config = validated({**SMALL_DISK, "mode": "constrained"})
    with pytest.raises(PhaseError) as err:
        MinMaxCoordinator(config, tmp_path).run()
    assert err.value.phase == PHASE_BUILD
    assert not (tmp_path / "report.json").exists()


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::minmax_surfaces.exceptions.BudgetTooSmall")
def test_disk_free_boundary_preset(tmp_path):
    config = validated({"scenario": "disk-free-boundary"})
    report = run_scenario(config, tmp_path)
    assert report.passed, [a.to_dict() for a in report.assertions]
    assert report.criterion.startswith("free-boundary width")
    assert report.diagnostics["oracle"]["value"] == pytest.approx(2.0)
    assert report.replacement is not None
    assert (tmp_path / "replacement_slice.json").exists()


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::minmax_surfaces.exceptions.BudgetTooSmall")
def test_bump_mountain_pass_preset(tmp_path):
    config = validated({"scenario": "bump-mountain-pass"})
    report = run_scenario(config, tmp_path)
    assert report.passed, [a.to_dict() for a in report.assertions]
    assert report.diagnostics["spectrum"]["index"] >= 1
    assert report.critical["residual"] <= 1e-3 * report.critical["mass"]
    assert {"trace", "replacement"} <= {a.name for a in report.assertions}
    assert report.freezes and all(f["passed"] for f in report.freezes)
    assert "freezing" in {a.name for a in report.assertions}


@pytest.mark.slow
@pytest.mark.filterwarnings("ignore::minmax_surfaces.exceptions.BudgetTooSmall")
def test_sphere_catenoid_preset(tmp_path):
    config = validated({"scenario": "sphere-catenoid"})
    report = run_scenario(config, tmp_path)
    assert report.passed, [a.to_dict() for a in report.assertions]
    assert report.diagnostics["spectrum"]["index"] >= 1
    assert report.diagnostics["wedge"]["passed"]
    assert {"trace", "replacement"} <= {a.name for a in report.assertions}
