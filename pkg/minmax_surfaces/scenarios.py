"""Scenario presets and the seed slices of connecting sweepouts."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from .ambient import AmbientDomain, GammaCircle, GammaPoint
from .const import (
    CONF_AMIN,
    CONF_DIAGNOSTICS,
    CONF_DOMAIN,
    CONF_FAMILY,
    CONF_MODE,
    CONF_NAME,
    CONF_PLATEAU,
    CONF_TIGHTEN,
    CONSTRAINED,
    DEFAULT_POLYLINE_VERTICES,
    MODE_BODY_3D,
    MODE_PLANAR_2D,
    UNCONSTRAINED,
)
from .exceptions import SweepoutError
from .oracles import catenoid_branches, string_method
from .sweepout import BoundaryCondition, Slice, revolved_slice
from .tighten import relax_slice

_LOGGER = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# seeds


def _gamma_points(domain: AmbientDomain) -> tuple[np.ndarray, np.ndarray]:
    points = [c.point for c in domain.gamma.components if isinstance(c, GammaPoint)]
    if len(points) != 2:
        raise SweepoutError("Arc seeds need exactly two gamma points")
    return points[0], points[1]


def _coaxial_circles(domain: AmbientDomain) -> tuple[float, float]:
    """Return (radius, half height) of two circles symmetric about z = 0."""
    circles = [c for c in domain.gamma.components if isinstance(c, GammaCircle)]
    if len(circles) != 2:
        raise SweepoutError("Catenoid seeds need exactly two gamma circles")
    heights = sorted(float(c.center[2]) for c in circles)
    if not np.isclose(heights[0], -heights[1]) or not np.isclose(circles[0].radius, circles[1].radius):
        raise SweepoutError("Gamma circles must be congruent and symmetric about z = 0")
    return circles[0].radius, heights[1]


def arc_seed(domain: AmbientDomain, through: np.ndarray, n_vertices: int = DEFAULT_POLYLINE_VERTICES) -> Slice:
    """Return the parabolic arc between the two gamma points passing through ``through``."""
    p0, p1 = _gamma_points(domain)
    control = 2.0 * np.asarray(through, dtype=float) - 0.5 * (p0 + p1)
    s = np.linspace(0.0, 1.0, n_vertices)[:, None]
    verts = (1.0 - s) ** 2 * p0 + 2.0 * s * (1.0 - s) * control + s**2 * p1
    return Slice(verts, bc=BoundaryCondition.CONSTRAINED)


def catenoid_seed(domain: AmbientDomain, branch: str = "stable", n_profile: int = 41, n_theta: int = 64) -> Slice:
    """Return the revolved catenoid spanning the two gamma circles."""
    radius, h = _coaxial_circles(domain)
    branches = catenoid_branches(radius, h)
    if not branches:
        raise SweepoutError(f"No catenoid spans circles of radius {radius:.4g} at +-{h:.4g}")
    a = branches[-1].a if branch == "stable" else branches[0].a
    z = np.linspace(h, -h, n_profile)
    r = a * np.cosh(z / a)
    r *= radius / r[0]
    return revolved_slice(np.column_stack([r, z]), n_theta, BoundaryCondition.CONSTRAINED)


def disks_seed(domain: AmbientDomain, n_profile: int = 41, n_theta: int = 64) -> Slice:
    """Return the two flat disks spanning the gamma circles as one revolved profile."""
    radius, h = _coaxial_circles(domain)
    half = max(n_profile // 2, 2)
    top = np.column_stack([np.linspace(radius, 0.0, half), np.full(half, h)])
    bottom = np.column_stack([np.linspace(0.0, radius, half), np.full(half, -h)])
    # consecutive pole vertices revolve to no faces: the axis segment carries no area
    return revolved_slice(np.vstack([top, bottom]), n_theta, BoundaryCondition.CONSTRAINED)


def seed_slice(domain: AmbientDomain, seed: dict[str, Any], family: dict[str, Any]) -> Slice:
    """Build (and optionally relax) one endpoint of a connecting sweepout."""
    kind = seed["kind"]
    if kind == "arc":
        if domain.mode != MODE_PLANAR_2D or "through" not in seed:
            raise SweepoutError("Arc seeds need a planar domain and a 'through' point")
        slice_ = arc_seed(domain, seed["through"], family.get("n_vertices", DEFAULT_POLYLINE_VERTICES))
    elif kind == "catenoid":
        slice_ = catenoid_seed(domain, seed.get("branch", "stable"), family.get("n_profile", 41), family["n_theta"])
    elif kind == "disks":
        slice_ = disks_seed(domain, family.get("n_profile", 41), family["n_theta"])
    else:
        raise SweepoutError(f"Unknown seed kind {kind!r}")
    if seed.get("relax", True):
        slice_ = relax_slice(domain, slice_)
    _LOGGER.debug("Seed %s ready: %d vertices", kind, len(slice_.vertices))
    return slice_


# ---------------------------------------------------------------------------
# presets


class Scenario:
    """Base class for scenario presets."""

    _attr_name: str = ""
    _attr_description: str = ""
    _attr_criterion: str = ""
    _attr_domain: dict[str, Any] = {}
    _attr_mode: str = CONSTRAINED
    _attr_family: dict[str, Any] = {}
    _attr_tighten: dict[str, Any] = {}
    _attr_amin: dict[str, Any] = {}
    _attr_plateau: dict[str, Any] = {}
    _attr_diagnostics: dict[str, Any] = {}
    _attr_expect: dict[str, Any] = {}

    @property
    def name(self) -> str:
        """Return the preset name."""
        return self._attr_name

    @property
    def criterion(self) -> str:
        """Return the acceptance criterion this preset instantiates."""
        return self._attr_criterion

    def config(self) -> dict[str, Any]:
        """Return the preset as raw scenario input."""
        return {
            CONF_NAME: self._attr_name,
            CONF_DOMAIN: dict(self._attr_domain),
            CONF_MODE: self._attr_mode,
            CONF_FAMILY: dict(self._attr_family),
            CONF_TIGHTEN: dict(self._attr_tighten),
            CONF_AMIN: dict(self._attr_amin),
            CONF_PLATEAU: dict(self._attr_plateau),
            CONF_DIAGNOSTICS: dict(self._attr_diagnostics),
            "expect": dict(self._attr_expect),
        }

    def oracle(self, domain: AmbientDomain, seeds: tuple[Slice, Slice] | None) -> dict[str, Any] | None:
        """Return the reference min-max value, or None when there is none."""
        return None


class DiskFreeBoundaryScenario(Scenario):
    """Width of the unit disk by free-boundary chords."""

    _attr_name = "disk-free-boundary"
    _attr_description = "Level-set chords of the flat unit disk; the min-max chord is a diameter"
    _attr_criterion = "free-boundary width: length 2.0 within 1e-2, orthogonality defect below 1e-2"
    _attr_domain = {CONF_MODE: MODE_PLANAR_2D, "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]}}
    _attr_mode = UNCONSTRAINED
    _attr_family = {"builder": "level_set", "resolution": 128, "n_vertices": 256}
    _attr_tighten = {"max_iters": 100}
    _attr_amin = {"schedule": [1, 2], "radii": [0.45, 0.045], "starts": 4, "steps": 200}
    _attr_plateau = {"region": "annulus", "inner": 0.05, "outer": 0.25}
    _attr_expect = {"m0": 2.0, "m0_rtol": 5e-3, "max_orthogonality_defect": 1e-2}

    def oracle(self, domain, seeds):
        """Return the width of the disk."""
        return {"name": "disk width", "value": 2.0 * min(domain.boundary.a, domain.boundary.b), "rtol": 5e-3}


class BumpMountainPassScenario(Scenario):
    """Mountain pass between the two side geodesics of a bumped disk."""

    _attr_name = "bump-mountain-pass"
    _attr_description = "Connecting sweepout between two stable geodesics around a Gaussian bump"
    _attr_criterion = "2-D mountain pass: length above both seeds, index >= 1, within 1% of the string saddle"
    _attr_domain = {
        CONF_MODE: MODE_PLANAR_2D,
        "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]},
        "phi": {"height": 1.0, "width": 0.3, "n": 129},
        "gamma": [[-1.0, 0.0], [1.0, 0.0]],
    }
    _attr_family = {
        "builder": "connecting",
        "resolution": 64,
        "n_vertices": 128,
        "seeds": [{"kind": "arc", "through": [0.0, 0.6]}, {"kind": "arc", "through": [0.0, -0.6]}],
    }
    _attr_tighten = {"max_iters": 400}
    # the over-bump slice is a.m. in annuli; the ball at its midpoint is not for eps below the gap
    _attr_amin = {"schedule": [1, 2, 4, 8, 16, 32], "radii": [0.45, 0.045], "ball": 0.5}
    _attr_plateau = {"region": "annulus", "inner": 0.05, "outer": 0.25}
    _attr_expect = {"oracle_rtol": 1e-2, "min_index": 1, "max_residual": 1e-3, "above_boundary": True, "wedge": True}

    def oracle(self, domain, seeds):
        """Return the saddle value of the string method between the seeds."""
        if seeds is None:
            return None
        result = string_method(domain, seeds[0].vertices, seeds[1].vertices)
        return {"name": "string-method saddle", "value": result.saddle_mass, "rtol": 1e-2}


class SphereCatenoidScenario(Scenario):
    """Mountain pass between the stable catenoid and two disks in the unit ball."""

    _attr_name = "sphere-catenoid"
    _attr_description = "Connecting sweepout from the stable catenoid to two disks spanning circles at z = +-0.4"
    _attr_criterion = "3-D mountain pass: area within 2% of the unstable catenoid, index 1, trace on gamma"
    _attr_domain = {CONF_MODE: MODE_BODY_3D, "semi_axes": [1.0, 1.0, 1.0], "gamma": [0.4, -0.4]}
    _attr_family = {
        "builder": "connecting",
        "resolution": 32,
        "n_profile": 41,
        "n_theta": 64,
        "refine": False,
        "seeds": [{"kind": "catenoid", "branch": "stable"}, {"kind": "disks", "relax": False}],
    }
    _attr_tighten = {"max_iters": 300}
    _attr_amin = {"schedule": [1], "radii": [0.45, 0.045], "starts": 2, "steps": 100}
    _attr_plateau = {"region": "ball", "outer": 0.25}
    _attr_diagnostics = {"radii": [0.05, 0.1, 0.2], "gap_samples": 20, "spectrum_count": 4}
    _attr_expect = {"oracle_rtol": 2e-2, "min_index": 1, "wedge": True}

    def oracle(self, domain, seeds):
        """Return the area of the unstable catenoid."""
        radius, h = _coaxial_circles(domain)
        branches = catenoid_branches(radius, h)
        if not branches:
            return None
        unstable = branches[0]
        return {"name": "unstable catenoid", "value": unstable.area, "index": unstable.index, "rtol": 2e-2}


SCENARIOS: dict[str, type[Scenario]] = {
    cls._attr_name: cls
    for cls in (DiskFreeBoundaryScenario, BumpMountainPassScenario, SphereCatenoidScenario)
}


def get_scenario(name: str) -> Scenario:
    """Return the preset registered under ``name``."""
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise KeyError(f"Unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None
