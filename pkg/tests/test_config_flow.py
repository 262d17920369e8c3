"""Tests for scenario validation and the preset registry."""

from __future__ import annotations

import json

import numpy as np
import pytest

from minmax_surfaces.config_flow import ScenarioConfigFlow, deep_merge, load_config
from minmax_surfaces.const import DEFAULT_AM_STEPS, DEFAULT_SEED, UNCONSTRAINED
from minmax_surfaces.exceptions import ConfigError, SweepoutError
from minmax_surfaces.scenarios import SCENARIOS, arc_seed, get_scenario, seed_slice
from minmax_surfaces.sweepout import BoundaryCondition

DISK = {"mode": "planar2d", "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]}}


def scenario(**extra):
    return {"name": "test", "domain": dict(DISK), **extra}


def test_minimal_scenario_gets_defaults():
    config, errors = ScenarioConfigFlow.validate(scenario())
    assert errors == {}
    assert config["mode"] == "constrained"
    assert config["seed"] == DEFAULT_SEED
    assert config["family"]["builder"] == "level_set"
    assert config["amin"]["steps"] == DEFAULT_AM_STEPS
    assert config["domain"]["gamma"] == []


def test_missing_name():
    config, errors = ScenarioConfigFlow.validate({"domain": DISK})
    assert config is None
    assert errors["base"] == "invalid_schema"
    assert errors["path"] == "name"


@pytest.mark.parametrize(
    "extra, path",
    [
        ({"plateau": {"inner": -0.1}}, "plateau/inner"),
        ({"plateau": {"inner": 0.3, "outer": 0.2}}, "plateau/inner"),
        ({"amin": {"radii": [0.1, 0.2]}}, "amin/radii"),
        ({"family": {"builder": "connecting"}}, "family/seeds"),
        ({"family": {"sweep_axis": 2}}, "family/sweep_axis"),
        ({"scenario": "no-such-preset"}, "scenario"),
    ],
)
def test_invalid_input_reports_the_path(extra, path):
    config, errors = ScenarioConfigFlow.validate(scenario(**extra))
    assert config is None
    assert errors["base"] == "invalid_schema"
    assert errors["path"] == path


def test_gamma_off_the_boundary_is_a_domain_error():
    config, errors = ScenarioConfigFlow.validate(scenario(domain={**DISK, "gamma": [[0.5, 0.0], [1.0, 0.0]]}))
    assert config is None
    assert errors["base"] == "invalid_domain"
    assert errors["path"] == "domain"


def test_preset_is_merged_under_the_input():
    config, errors = ScenarioConfigFlow.validate({"scenario": "disk-free-boundary", "tighten": {"max_iters": 7}})
    assert errors == {}
    assert config["name"] == "disk-free-boundary"
    assert config["mode"] == UNCONSTRAINED
    assert config["tighten"]["max_iters"] == 7
    assert config["family"]["resolution"] == 128


def test_deep_merge_leaves_inputs_alone():
    base = {"a": {"b": 1, "c": 2}, "d": [1]}
    merged = deep_merge(base, {"a": {"b": 3}, "d": [2]})
    assert merged == {"a": {"b": 3, "c": 2}, "d": [2]}
    assert base == {"a": {"b": 1, "c": 2}, "d": [1]}


def test_load_config(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario(seed=5)), encoding="utf-8")
    assert load_config(path)["seed"] == 5


def test_load_config_errors(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)
    listing = tmp_path / "list.json"
    listing.write_text("[]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listing)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps(scenario(plateau={"inner": -1.0})), encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        load_config(invalid)
    assert err.value.path == ["plateau", "inner"]


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_presets_validate(name):
    preset = get_scenario(name)
    assert preset.name == name
    assert preset.criterion
    config, errors = ScenarioConfigFlow.validate(preset.config())
    assert errors == {}, errors
    assert config["name"] == name


def test_unknown_preset():
    with pytest.raises(KeyError):
        get_scenario("torus")


def test_disk_oracle_is_the_width(disk):
    assert get_scenario("disk-free-boundary").oracle(disk, None)["value"] == pytest.approx(2.0)
    assert get_scenario("bump-mountain-pass").oracle(disk, None) is None


def test_sphere_oracle_is_the_unstable_catenoid(ball):
    oracle = get_scenario("sphere-catenoid").oracle(ball, None)
    assert oracle["value"] == pytest.approx(5.60, rel=1e-2)
    assert oracle["index"] == 1


def test_arc_seed(constrained_disk):
    arc = arc_seed(constrained_disk, np.array([0.0, 0.6]), n_vertices=33)
    assert arc.bc == BoundaryCondition.CONSTRAINED
    np.testing.assert_allclose(arc.vertices[[0, -1]], [[-1.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(arc.vertices[16], [0.0, 0.6])


def test_seed_slice_errors(constrained_disk, disk):
    family = {"n_vertices": 33, "n_theta": 16}
    with pytest.raises(SweepoutError):
        seed_slice(constrained_disk, {"kind": "arc"}, family)
    with pytest.raises(SweepoutError):
        seed_slice(disk, {"kind": "arc", "through": [0.0, 0.5]}, family)
    with pytest.raises(SweepoutError):
        seed_slice(constrained_disk, {"kind": "torus"}, family)
