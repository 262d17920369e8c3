"""Tests for local Plateau minimisation, cone homotopies and replacements."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import chord, wiggly_chord
from minmax_surfaces import plateau
from minmax_surfaces.comb import Annulus, Ball
from minmax_surfaces.exceptions import BarrierBlocked, PlateauError
from minmax_surfaces.geometry import disk_mesh
from minmax_surfaces.plateau import (
    MODE_FREE,
    PlateauProblem,
    certified_radius,
    cone_homotopy,
    construct_replacement,
    local_minimize,
)
from minmax_surfaces.sweepout import BoundaryCondition, Slice, slice_mass, trivial_slice
from minmax_surfaces.tighten import VectorFieldClass

REGION = Ball([0.0, 0.0], 0.5)


def test_problem_checks_its_arguments():
    with pytest.raises(PlateauError):
        PlateauProblem(wiggly_chord(), REGION, 0.0)
    with pytest.raises(PlateauError):
        PlateauProblem(wiggly_chord(), REGION, 0.1, mode="sideways")
    problem = PlateauProblem(wiggly_chord(), REGION, 0.08, m=2, mode=MODE_FREE)
    assert problem.energy_cap == pytest.approx(0.005)
    assert problem.vector_class == VectorFieldClass.TANGENT_TO_BOUNDARY


def test_local_minimize_straightens_inside_the_region(constrained_disk):
    start = wiggly_chord()
    result = local_minimize(constrained_disk, PlateauProblem(start, REGION, 0.01))
    outside = ~result.movable
    np.testing.assert_array_equal(result.slice.vertices[outside], start.vertices[outside])
    assert result.masses[-1] < result.masses[0] - 0.005
    assert max(result.masses) <= result.masses[0] + 0.01 / 8
    # the minimiser is the segment between the two fixed vertices on the ball boundary
    inner = result.slice.vertices[result.movable]
    np.testing.assert_allclose(inner[:, 1], start.vertices[16, 1], atol=1e-6)


def test_free_endpoint_slides_to_the_closest_wall_point(disk):
    x = np.sqrt(1.0 - 0.3**2)
    start = chord((-x, 0.3), (x, 0.3), bc=BoundaryCondition.FREE)
    region = Ball([x, 0.3], 0.3)
    result = local_minimize(disk, PlateauProblem(start, region, 0.1, mode=MODE_FREE))
    end = result.slice.vertices[-1]
    anchor = start.vertices[26]
    assert np.linalg.norm(end) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(end, anchor / np.linalg.norm(anchor), atol=1e-4)
    assert slice_mass(disk, result.slice) < slice_mass(disk, start)


def test_replacement_of_a_wiggle_lowers_the_mass(constrained_disk):
    replacement = construct_replacement(constrained_disk, wiggly_chord(), REGION, 0.01)
    assert set(replacement.checks) == {"exterior", "mass", "residual", "stability", "trace"}
    # a cheaper competitor: the wiggle is not almost minimizing in the region
    assert not replacement.passed
    assert not replacement.checks["mass"]
    assert all(ok for name, ok in replacement.checks.items() if name != "mass")
    assert replacement.lowered_mass
    assert not replacement.mass_preserved
    assert replacement.stability_margin > 0.0
    assert replacement.to_dict()["lowered_mass"]


def test_replacement_of_a_stationary_chord_keeps_the_mass(constrained_disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0), n=65)
    replacement = construct_replacement(constrained_disk, straight, REGION, 0.01)
    assert replacement.passed
    assert replacement.mass_preserved
    assert not replacement.lowered_mass
    assert replacement.mass_after == pytest.approx(2.0)


def test_replacement_restarts_reach_the_same_minimum(constrained_disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0), n=65)
    replacement = construct_replacement(constrained_disk, straight, REGION, 0.01, restarts=2, seed=5)
    assert len(replacement.restart_masses) == 2
    assert replacement.restart_masses == pytest.approx([2.0, 2.0], abs=1e-4)
    assert replacement.limit_spread < 1e-4
    assert replacement.to_dict()["restart_masses"] == replacement.restart_masses


def test_cone_homotopy_of_a_chord_at_gamma(constrained_disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0))
    family, report = cone_homotopy(constrained_disk, straight, np.array([1.0, 0.0]), 0.1)
    assert len(family) == 31
    assert report.crossings == 1
    assert 0.1 < report.radius < 0.15
    assert report.c == pytest.approx(1.0)
    assert report.passed
    assert report.excess == pytest.approx(0.0, abs=1e-12)
    masses = [slice_mass(constrained_disk, s) for s in family]
    np.testing.assert_allclose(masses, 2.0, atol=1e-12)
    assert report.to_dict()["crossings"] == 1


def test_cone_homotopy_target_must_share_the_trace(constrained_disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0))
    with pytest.raises(PlateauError):
        cone_homotopy(constrained_disk, straight, np.array([1.0, 0.0]), 0.1, target=chord((0.0, 1.0), (1.0, 0.0)))


def test_cone_homotopy_needs_a_polyline(ball):
    vertices, faces = disk_mesh(0.5, 0.0, 2, 8)
    with pytest.raises(PlateauError):
        cone_homotopy(ball, Slice(vertices, faces, BoundaryCondition.FREE), np.array([1.0, 0.0, 0.0]), 0.1)


def test_certified_radius(disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0))
    # flat disk: C_M = 1 / diam and rho = cap / (2 * 5 * C_M * mass)
    assert certified_radius(disk, straight, 0.01) == pytest.approx(0.002)
    assert certified_radius(disk, straight, 0.04) == pytest.approx(4.0 * certified_radius(disk, straight, 0.01))
    assert certified_radius(disk, trivial_slice(np.zeros(2)), 0.01) == pytest.approx(2.0)


def test_replacement_moves_the_over_bump_chord_to_a_side(bump, bump_geodesics):
    straight = chord((-1.0, 0.0), (1.0, 0.0), n=129)
    replacement = construct_replacement(bump, straight, Ball([0.0, 0.0], 0.9), 1.0)
    assert replacement.lowered_mass
    assert not replacement.checks["mass"]
    assert all(ok for name, ok in replacement.checks.items() if name != "mass"), replacement.checks
    y = replacement.slice.vertices[:, 1]
    assert np.max(np.abs(y)) > 0.3
    assert np.all(y >= -1e-9) or np.all(y <= 1e-9)
    # still pinned at (+-0.9, 0), so no shorter than the free side geodesic
    upper, _ = bump_geodesics
    assert slice_mass(bump, upper) * (1.0 - 1e-2) <= replacement.mass_after < replacement.mass_before - 1e-3


def _spiking(monkeypatch):
    descend = plateau._descend

    def spiked(*args):
        result, masses, converged = descend(*args)
        return result, [masses[0] + 10.0, *masses], converged

    monkeypatch.setattr(plateau, "_descend", spiked)


def test_cone_route_reaches_a_descent_that_crossed_the_cap(constrained_disk, monkeypatch):
    _spiking(monkeypatch)
    start = wiggly_chord()
    problem = PlateauProblem(start, REGION, 50.0)
    result = local_minimize(constrained_disk, problem)
    assert result.cone is not None and result.cone.passed
    assert 0.5 < result.cone.radius < 0.75
    assert max(result.masses) <= slice_mass(constrained_disk, start) + problem.energy_cap
    inner = result.slice.vertices[result.movable]
    np.testing.assert_allclose(inner[:, 1], start.vertices[16, 1], atol=1e-6)


def test_cone_route_needs_the_certified_radius(constrained_disk, monkeypatch):
    _spiking(monkeypatch)
    with pytest.raises(BarrierBlocked):
        local_minimize(constrained_disk, PlateauProblem(wiggly_chord(), REGION, 0.01))


def test_replacement_shrinks_to_the_certified_radius(constrained_disk):
    straight = chord((-1.0, 0.0), (1.0, 0.0), n=65)
    replacement = construct_replacement(constrained_disk, straight, Annulus([0.0, 0.0], 0.05, 0.5), 0.01, certified=0.2)
    assert isinstance(replacement.region, Annulus)
    assert replacement.region.outer == pytest.approx(0.2)
    assert replacement.region.inner == pytest.approx(0.05)
    assert replacement.passed, replacement.checks
