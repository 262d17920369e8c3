"""Tests for the independent reference computations."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from conftest import chord
from minmax_surfaces.oracles import (
    catenoid_area,
    catenoid_branches,
    catenoid_family_saddle,
    catenoid_index,
    geodesic_conjugate_points,
    jacobi_zero_count,
    refined_distance,
    simpson_line_mass,
    string_method,
    two_disk_area,
)
from minmax_surfaces.sweepout import slice_mass

RADIUS = np.sqrt(0.84)


@pytest.fixture(scope="module")
def branches():
    return catenoid_branches(RADIUS, 0.4)


def test_two_catenoids_span_the_circles(branches):
    unstable, stable = branches
    assert unstable.a < stable.a
    assert stable.a == pytest.approx(0.817, abs=1e-3)
    for branch in branches:
        assert branch.a * np.cosh(0.4 / branch.a) == pytest.approx(RADIUS, rel=1e-12)


def test_catenoid_areas(branches):
    unstable, stable = branches
    assert stable.area == pytest.approx(4.449, rel=1e-3)
    assert unstable.area == pytest.approx(5.60, rel=1e-2)
    assert two_disk_area(RADIUS) == pytest.approx(2.0 * np.pi * 0.84)
    assert stable.area < two_disk_area(RADIUS) < unstable.area


def test_catenoid_index(branches):
    unstable, stable = branches
    assert (stable.index, unstable.index) == (0, 1)
    assert catenoid_index(stable.a, 0.4) == 0
    assert unstable.neck > stable.neck


def test_area_formula_matches_quadrature():
    z = np.linspace(-0.4, 0.4, 20001)
    r = 0.8 * np.cosh(z / 0.8)
    numeric = 2.0 * np.pi * integrate.trapezoid(r * np.sqrt(1.0 + np.sinh(z / 0.8) ** 2), z)
    assert catenoid_area(0.8, 0.4) == pytest.approx(numeric, rel=1e-6)


def test_circles_too_far_apart_have_no_catenoid():
    assert catenoid_branches(0.5, 1.0) == []
    assert catenoid_family_saddle(0.5, 1.0) == pytest.approx(two_disk_area(0.5))


def test_family_saddle_is_the_unstable_catenoid(branches):
    assert catenoid_family_saddle(RADIUS, 0.4) == pytest.approx(branches[0].area, rel=1e-3)


def test_jacobi_zero_count():
    assert jacobi_zero_count(lambda s: np.zeros_like(s), 0.0, 5.0) == 0
    # sin(s) vanishes at pi and 2 pi
    assert jacobi_zero_count(lambda s: np.ones_like(s), 0.0, 2.0 * np.pi + 0.5) == 2


def test_flat_geodesic_has_no_conjugate_points(disk):
    assert geodesic_conjugate_points(disk, chord((-1.0, 0.0), (1.0, 0.0)).vertices) == 0


def test_simpson_line_mass(disk, bump, bump_geodesics):
    assert simpson_line_mass(disk, np.array([[0.0, 0.0], [0.3, 0.4]])) == pytest.approx(0.5)
    upper, _ = bump_geodesics
    assert simpson_line_mass(bump, upper.vertices) == pytest.approx(slice_mass(bump, upper), rel=1e-3)


def test_refined_distance_on_a_grid_axis(disk):
    assert refined_distance(disk, np.zeros(2), np.array([0.5, 0.0])) == pytest.approx(0.5, rel=2e-2)


@pytest.mark.slow
def test_string_method_climbs_over_the_bump(bump, bump_geodesics):
    upper, lower = bump_geodesics
    result = string_method(bump, upper.vertices, lower.vertices, images=9, vertices=33, iterations=300)
    assert len(result.images) == 9
    assert 0 < result.saddle < 8
    assert result.saddle_mass > max(result.masses[0], result.masses[-1])
    for image in result.images:
        np.testing.assert_allclose(image[[0, -1]], upper.vertices[[0, -1]])
