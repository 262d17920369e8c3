"""Scenario configuration schemas and validation."""

from __future__ import annotations

import copy
import json
import logging
from pathlib import Path
from typing import Any

import voluptuous as vol

from .ambient import load_domain
from .const import (
    CONF_AMIN,
    CONF_BOUNDARY,
    CONF_COMB,
    CONF_DIAGNOSTICS,
    CONF_DOMAIN,
    CONF_FAMILY,
    CONF_GAMMA,
    CONF_MODE,
    CONF_NAME,
    CONF_OUTPUT_DIR,
    CONF_PHI,
    CONF_PHI_GRID,
    CONF_PLATEAU,
    CONF_SCENARIO,
    CONF_SEED,
    CONF_SEMI_AXES,
    CONF_TIGHTEN,
    CONSTRAINED,
    DEFAULT_AM_STARTS,
    DEFAULT_AM_STEPS,
    DEFAULT_ETA,
    DEFAULT_FAMILY_RESOLUTION,
    DEFAULT_MAX_ITERS,
    DEFAULT_MONOTONICITY_TOL,
    DEFAULT_PLATEAU_RESTARTS,
    DEFAULT_POLYLINE_VERTICES,
    DEFAULT_SEED,
    DEFAULT_SPEC_TOL,
    DEFAULT_SPEED_SCALE,
    DEFAULT_STEP_SIZE,
    DEFAULT_TOL_REPLACE,
    MODE_BODY_3D,
    MODE_PLANAR_2D,
    UNCONSTRAINED,
)
from .exceptions import ConfigError, DomainError

_LOGGER = logging.getLogger(__name__)

Positive = vol.All(vol.Coerce(float), vol.Range(min=0.0, min_included=False))
PositiveInt = vol.All(vol.Coerce(int), vol.Range(min=1))
Point = vol.All([vol.Coerce(float)], vol.Length(min=2, max=3))

BUILDER_LEVEL_SET = "level_set"
BUILDER_CONNECTING = "connecting"

DOMAIN_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_MODE): vol.In([MODE_PLANAR_2D, MODE_BODY_3D]),
        vol.Optional(CONF_BOUNDARY): vol.Schema(
            {
                vol.Optional("kind", default="ellipse"): vol.In(["ellipse", "spline", "ellipsoid"]),
                vol.Optional("semi_axes"): [Positive],
                vol.Optional("center"): Point,
                vol.Optional("rotation"): vol.Coerce(float),
                vol.Optional("control_points"): [Point],
            }
        ),
        vol.Optional(CONF_SEMI_AXES): [Positive],
        vol.Optional(CONF_PHI): vol.Schema(
            {
                vol.Optional("height", default=1.0): vol.Coerce(float),
                vol.Optional("width", default=0.3): Positive,
                vol.Optional("n", default=129): vol.All(vol.Coerce(int), vol.Range(min=5)),
            }
        ),
        vol.Optional(CONF_PHI_GRID): dict,
        vol.Optional(CONF_GAMMA, default=list): list,
    }
)

SEED_SCHEMA = vol.Schema(
    {
        vol.Required("kind"): vol.In(["arc", "catenoid", "disks"]),
        vol.Optional("through"): Point,
        vol.Optional("branch", default="stable"): vol.In(["stable", "unstable"]),
        vol.Optional("relax", default=True): bool,
    }
)

FAMILY_SCHEMA = vol.Schema(
    {
        vol.Optional("builder", default=BUILDER_LEVEL_SET): vol.In([BUILDER_LEVEL_SET, BUILDER_CONNECTING]),
        vol.Optional("k", default=1): vol.In([1]),
        vol.Optional("resolution", default=DEFAULT_FAMILY_RESOLUTION): vol.All(vol.Coerce(int), vol.Range(min=3)),
        vol.Optional("n_vertices", default=DEFAULT_POLYLINE_VERTICES): vol.All(vol.Coerce(int), vol.Range(min=4)),
        vol.Optional("n_rings", default=12): PositiveInt,
        vol.Optional("n_theta", default=48): vol.All(vol.Coerce(int), vol.Range(min=8)),
        vol.Optional("n_profile"): vol.All(vol.Coerce(int), vol.Range(min=4)),
        vol.Optional("sweep_axis", default=0): vol.In([0, 1, 2]),
        vol.Optional("seeds"): vol.All([SEED_SCHEMA], vol.Length(min=2, max=2)),
        vol.Optional("refine", default=True): bool,
    }
)

TIGHTEN_SCHEMA = vol.Schema(
    {
        vol.Optional("step_size", default=DEFAULT_STEP_SIZE): Positive,
        vol.Optional("max_iters", default=DEFAULT_MAX_ITERS): PositiveInt,
        vol.Optional("residual_tol"): Positive,
        vol.Optional("speed_scale", default=DEFAULT_SPEED_SCALE): Positive,
        vol.Optional("damping_width", default=0.05): Positive,
        vol.Optional("smoothing", default=True): bool,
    }
)

AMIN_SCHEMA = vol.Schema(
    {
        vol.Optional("enabled", default=True): bool,
        vol.Optional("schedule", default=[1, 2, 4]): [PositiveInt],
        vol.Optional("m", default=1): PositiveInt,
        vol.Optional("steps", default=DEFAULT_AM_STEPS): PositiveInt,
        vol.Optional("starts", default=DEFAULT_AM_STARTS): PositiveInt,
        vol.Optional("radii", default=[0.45, 0.045]): vol.All([Positive], vol.Length(min=2)),
        # euclidean radius of the extra ball searched around the critical slice
        vol.Optional("ball"): Positive,
    }
)

COMB_SCHEMA = vol.Schema(
    {
        vol.Optional("eta", default=DEFAULT_ETA): Positive,
    }
)

PLATEAU_SCHEMA = vol.Schema(
    {
        vol.Optional("enabled", default=True): bool,
        vol.Optional("region", default="annulus"): vol.In(["ball", "annulus"]),
        vol.Optional("inner", default=0.05): Positive,
        vol.Optional("outer", default=0.25): Positive,
        vol.Optional("eps", default=1.0): Positive,
        vol.Optional("tol_replace", default=DEFAULT_TOL_REPLACE): Positive,
        vol.Optional("spec_tol", default=DEFAULT_SPEC_TOL): Positive,
        vol.Optional("restarts", default=DEFAULT_PLATEAU_RESTARTS): vol.All(vol.Coerce(int), vol.Range(min=0)),
    }
)

DIAGNOSTICS_SCHEMA = vol.Schema(
    {
        vol.Optional("radii", default=[0.02, 0.04, 0.08, 0.16]): vol.All([Positive], vol.Length(min=2)),
        vol.Optional("probes", default=list): [Point],
        vol.Optional("monotonicity_tol", default=DEFAULT_MONOTONICITY_TOL): Positive,
        vol.Optional("spectrum_count", default=6): PositiveInt,
        vol.Optional("gap_eps", default=[0.01]): [Positive],
        vol.Optional("gap_samples", default=50): PositiveInt,
        vol.Optional("oracle", default=True): bool,
    }
)

EXPECT_SCHEMA = vol.Schema(
    {
        vol.Optional("m0"): vol.Coerce(float),
        vol.Optional("m0_rtol", default=1e-2): Positive,
        vol.Optional("oracle_rtol"): Positive,
        vol.Optional("max_orthogonality_defect"): Positive,
        vol.Optional("min_index"): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional("max_residual"): Positive,
        vol.Optional("above_boundary", default=False): bool,
        vol.Optional("wedge", default=False): bool,
    }
)

SCENARIO_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NAME): str,
        vol.Optional(CONF_SCENARIO): str,
        vol.Required(CONF_DOMAIN): DOMAIN_SCHEMA,
        vol.Optional(CONF_MODE, default=CONSTRAINED): vol.In([CONSTRAINED, UNCONSTRAINED]),
        vol.Optional(CONF_FAMILY, default=dict): FAMILY_SCHEMA,
        vol.Optional(CONF_TIGHTEN, default=dict): TIGHTEN_SCHEMA,
        vol.Optional(CONF_AMIN, default=dict): AMIN_SCHEMA,
        vol.Optional(CONF_COMB, default=dict): COMB_SCHEMA,
        vol.Optional(CONF_PLATEAU, default=dict): PLATEAU_SCHEMA,
        vol.Optional(CONF_DIAGNOSTICS, default=dict): DIAGNOSTICS_SCHEMA,
        vol.Optional("expect", default=dict): EXPECT_SCHEMA,
        vol.Optional(CONF_OUTPUT_DIR): str,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
    }
)


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Return base updated recursively with override."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class ScenarioConfigFlow:
    """Validate scenario input the way a config flow validates a form."""

    @staticmethod
    def validate(user_input: dict[str, Any]) -> tuple[dict[str, Any] | None, dict[str, str]]:
        """Return (config, errors); config is None when errors is not empty."""
        errors: dict[str, str] = {}
        try:
            data = dict(user_input)
            if CONF_SCENARIO in data:
                # local import: scenarios builds on the schemas above
                from .scenarios import SCENARIOS, get_scenario

                if data[CONF_SCENARIO] not in SCENARIOS:
                    raise vol.Invalid(f"unknown scenario {data[CONF_SCENARIO]!r}", path=[CONF_SCENARIO])
                data = deep_merge(get_scenario(data[CONF_SCENARIO]).config(), data)
            config = SCENARIO_SCHEMA(data)
            load_domain(config[CONF_DOMAIN])
            _check_consistency(config)
        except vol.Invalid as err:
            _LOGGER.error("Invalid scenario config: %s", err)
            errors["base"] = "invalid_schema"
            errors["path"] = "/".join(str(part) for part in err.path)
            errors["message"] = str(err)
        except (DomainError, KeyError) as err:
            _LOGGER.error("Invalid domain: %s", err)
            errors["base"] = "invalid_domain"
            errors["path"] = CONF_DOMAIN
            errors["message"] = str(err)
        except Exception as err:  # noqa: BLE001
            _LOGGER.exception("Unexpected exception while validating config")
            errors["base"] = "unknown"
            errors["message"] = str(err)
        else:
            return config, errors
        return None, errors


def _check_consistency(config: dict[str, Any]) -> None:
    family = config[CONF_FAMILY]
    if family["builder"] == BUILDER_CONNECTING and "seeds" not in family and CONF_SCENARIO not in config:
        raise vol.Invalid("connecting builder needs two seeds", path=[CONF_FAMILY, "seeds"])
    plateau = config[CONF_PLATEAU]
    if plateau["region"] == "annulus" and plateau["inner"] >= plateau["outer"]:
        raise vol.Invalid("inner radius must be smaller than outer radius", path=[CONF_PLATEAU, "inner"])
    radii = config[CONF_AMIN]["radii"]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise vol.Invalid("radii must be strictly decreasing", path=[CONF_AMIN, "radii"])
    if config[CONF_DOMAIN][CONF_MODE] == MODE_PLANAR_2D and family.get("sweep_axis", 0) == 2:
        raise vol.Invalid("sweep axis 2 needs a 3-D domain", path=[CONF_FAMILY, "sweep_axis"])


def load_config(path: str | Path) -> dict[str, Any]:
    """Read and validate a scenario file, raising ConfigError on failure."""
    try:
        with open(path, encoding="utf-8") as handle:
            user_input = json.load(handle)
    except json.JSONDecodeError as err:
        raise ConfigError(f"Config is not valid JSON: {err}") from err
    except OSError as err:
        raise ConfigError(f"Cannot read config: {err}") from err
    if not isinstance(user_input, dict):
        raise ConfigError("Config must be a JSON object")
    config, errors = ScenarioConfigFlow.validate(user_input)
    if config is None:
        path_parts = errors.get("path", "").split("/") if errors.get("path") else []
        raise ConfigError(f"{errors['base']}: {errors.get('message', '')}", path_parts)
    return config
