"""Tests for varifold densities, wedge, spectrum and boundary diagnostics."""

from __future__ import annotations

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from conftest import chord
from minmax_surfaces.ambient import ellipse_domain, unit_disk
from minmax_surfaces.exceptions import (
    AngleOutOfRange,
    EvenCount,
    NotStable,
    NotStationary,
    RadiiOutOfRange,
)
from minmax_surfaces.geometry import disk_mesh
from minmax_surfaces.scenarios import catenoid_seed
from minmax_surfaces.sweepout import BoundaryCondition, Slice
from minmax_surfaces.tighten import VectorFieldClass
from minmax_surfaces.varifold import (
    boundary_report,
    convex_hull_check,
    density_profiles,
    local_min_gap,
    monotonicity_constant,
    monotonicity_profile,
    rayleigh_check,
    second_variation_spectrum,
    to_varifold,
    unit_vectors,
    vector_sum_bound,
    wedge_angle,
    wedge_check,
)

RADII = [0.1, 0.2, 0.4]


@pytest.fixture(scope="module")
def diameter():
    return chord((-1.0, 0.0), (1.0, 0.0))


@pytest.fixture(scope="module")
def free_diameter():
    return chord((-1.0, 0.0), (1.0, 0.0), bc=BoundaryCondition.FREE)


def test_varifold_mass(disk, diameter):
    varifold = to_varifold(disk, diameter)
    assert varifold.total_mass == pytest.approx(2.0)
    assert varifold.ball_mass(np.zeros(2), 0.3) == pytest.approx(0.6)
    assert to_varifold(disk).total_mass == 0.0


def test_line_density(disk, diameter):
    report = monotonicity_profile(disk, to_varifold(disk, diameter), np.zeros(2), RADII)
    assert report.kind == "interior"
    np.testing.assert_allclose(report.ratios, 1.0)
    assert report.theta == pytest.approx(1.0)
    assert report.monotone
    assert report.rows()[0] == {"rho": 0.1, "f": pytest.approx(1.0)}


def test_half_line_density_at_the_boundary(disk, diameter):
    varifold = to_varifold(disk, diameter)
    report = monotonicity_profile(disk, varifold, np.array([1.0, 0.0]), RADII)
    assert report.kind == "boundary"
    assert report.theta == pytest.approx(0.5)
    reflected = monotonicity_profile(disk, varifold, np.array([1.0, 0.0]), RADII, free_boundary=True)
    assert reflected.kind == "reflected"
    assert reflected.theta == pytest.approx(1.0)


def test_crossing_lines_have_density_two(disk, diameter):
    other = chord((0.0, -1.0), (0.0, 1.0))
    reports = density_profiles(disk, to_varifold(disk, diameter, other), np.array([[0.0, 0.0], [0.5, 0.0]]), RADII)
    assert reports[0].theta == pytest.approx(2.0)
    assert reports[1].theta == pytest.approx(1.0)
    assert reports[0].to_dict()["c_m"] == pytest.approx(monotonicity_constant(disk))


def test_monotonicity_flags_decreasing_ratios(disk):
    short = chord((-0.15, 0.0), (0.15, 0.0))
    report = monotonicity_profile(disk, to_varifold(disk, short), np.zeros(2), RADII)
    assert report.non_monotone == [0, 1]
    assert not report.monotone
    assert np.all(np.diff(report.phi_table) >= 0.0)


@pytest.mark.parametrize(
    "radii, center",
    [([0.2, 0.1], [0.0, 0.0]), ([0.1, 3.0], [0.0, 0.0]), ([], [0.0, 0.0]), ([0.1], [2.0, 0.0])],
)
def test_monotonicity_rejects_bad_input(disk, diameter, radii, center):
    with pytest.raises(RadiiOutOfRange):
        monotonicity_profile(disk, to_varifold(disk, diameter), np.array(center), radii)


def test_wedge_angle_of_two_points():
    domain = unit_disk([(1.0, 0.0), (0.0, 1.0)])
    assert wedge_angle(domain, np.array([1.0, 0.0])) == pytest.approx(np.pi / 4)


@given(st.floats(0.2, 3.0))
@settings(max_examples=25, deadline=None)
def test_wedge_angle_on_the_disk_is_the_chord_angle(delta):
    other = (np.cos(delta), np.sin(delta))
    domain = unit_disk([(1.0, 0.0), other])
    assert wedge_angle(domain, np.array([1.0, 0.0])) == pytest.approx(np.pi / 2 - delta / 2, abs=1e-7)


def test_wedge_angle_bounds_the_chords_of_an_ellipse():
    domain = ellipse_domain(2.0, 1.0, [(2.0, 0.0), (0.0, 1.0)])
    reach = np.sqrt(5.0)
    for point, nu in [((2.0, 0.0), (-1.0, 0.0)), ((0.0, 1.0), (0.0, -1.0))]:
        point = np.array(point)
        theta = wedge_angle(domain, point)
        assert theta == pytest.approx(np.arccos(domain.convexity_modulus * reach / 2.0))
        d = (np.array([2.0, 1.0]) - 2.0 * point) / reach
        assert np.arccos(d @ np.array(nu)) <= theta < np.pi / 2


def test_wedge_check():
    domain = unit_disk([(1.0, 0.0), (0.0, 1.0)])
    inside = Slice(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), bc=BoundaryCondition.CONSTRAINED)
    report = wedge_check(domain, inside)
    assert report.passed
    assert report.margin == pytest.approx(np.pi / 4)
    bulging = Slice(np.array([[1.0, 0.0], [0.9, 0.4], [0.4, 0.9], [0.0, 1.0]]), bc=BoundaryCondition.CONSTRAINED)
    report = wedge_check(domain, bulging)
    assert not report.passed
    assert report.measured[0] == pytest.approx(np.arctan2(0.4, 0.1))
    assert wedge_check(domain, bulging, theta_target=1.4).passed


def test_wedge_angle_on_a_gamma_circle(ball):
    theta = wedge_angle(ball, np.array([np.sqrt(0.84), 0.0, 0.4]))
    assert 0.0 < theta < np.pi / 2
    assert np.tan(theta) * np.sin(theta) ** 2 == pytest.approx(1.0 / np.sqrt(0.84), rel=1e-6)


def test_stable_chord_spectrum(constrained_disk, diameter):
    report = second_variation_spectrum(constrained_disk, diameter, VectorFieldClass.INWARD_VANISH_ON_GAMMA, count=3)
    assert report.index == 0
    assert report.chart.size == 31
    assert report.stability_margin == pytest.approx((np.pi / 2) ** 2, rel=1e-2)
    assert rayleigh_check(constrained_disk, diameter, report) < 1e-4


def test_free_diameter_has_index_one(disk, free_diameter):
    report = second_variation_spectrum(disk, free_diameter, VectorFieldClass.TANGENT_TO_BOUNDARY, count=3)
    assert report.index == 1
    # the lowest mode solves k tanh k = 1 and the rotation is a zero mode
    assert report.eigenvalues[0] == pytest.approx(-1.4393, rel=5e-2)
    assert abs(report.eigenvalues[1]) < 1e-4
    assert report.to_dict()["index"] == 1


def test_spectrum_needs_a_stationary_slice(constrained_disk):
    tent = Slice(np.array([[-1.0, 0.0], [0.0, 0.5], [1.0, 0.0]]), bc=BoundaryCondition.CONSTRAINED)
    with pytest.raises(NotStationary):
        second_variation_spectrum(constrained_disk, tent, VectorFieldClass.INWARD_VANISH_ON_GAMMA)


def test_local_min_gap(constrained_disk, diameter):
    table = local_min_gap(constrained_disk, diameter, [0.0, 0.01, 0.02], samples=20)
    assert table.passed
    assert table.margin > 0.0
    assert np.isnan(table.ratios[0])
    for ratio in table.ratios[1:]:
        assert 0.25 <= ratio <= 4.0
    assert len(table.rows()) == 3


def test_local_min_gap_needs_stability(disk, free_diameter):
    spectrum = second_variation_spectrum(disk, free_diameter, VectorFieldClass.TANGENT_TO_BOUNDARY, count=3)
    with pytest.raises(NotStable):
        local_min_gap(disk, free_diameter, [0.01], spectrum=spectrum)


def test_boundary_report_of_a_clean_chord(constrained_disk, diameter):
    report = boundary_report(constrained_disk, diameter)
    assert report.max_principle_ok
    assert report.curvature_ratio == 0.0
    assert report.gamma_mass == 0.0
    assert report.total_mass == pytest.approx(2.0)


def test_boundary_report_flags_wall_contact(constrained_disk):
    touching = chord((-1.0, 0.0), (0.0, 1.0))
    assert not boundary_report(constrained_disk, touching).max_principle_ok


def test_orthogonality_defect(disk):
    x = np.sqrt(1.0 - 0.3**2)
    tilted = chord((-x, 0.3), (x, 0.3), bc=BoundaryCondition.FREE)
    assert boundary_report(disk, tilted).orthogonality_defect == pytest.approx(np.arcsin(0.3), rel=1e-6)


def test_convex_hull_of_two_points(constrained_disk, diameter):
    inside, margin = convex_hull_check(constrained_disk, diameter)
    assert inside
    assert margin == pytest.approx(0.0, abs=1e-9)
    inside, margin = convex_hull_check(constrained_disk, chord((-1.0, 0.0), (0.0, 0.5)))
    assert not inside
    assert margin < 0.0


def test_convex_hull_of_two_circles(ball):
    assert convex_hull_check(ball, catenoid_seed(ball, "stable", n_profile=21, n_theta=32))[0]
    vertices, faces = disk_mesh(0.99, 0.0, 3, 32)
    assert not convex_hull_check(ball, Slice(vertices, faces, BoundaryCondition.FREE))[0]


def test_vector_sums():
    assert vector_sum_bound(unit_vectors([0.0, 0.0, 0.0])) == pytest.approx(3.0)
    assert vector_sum_bound(unit_vectors(np.radians([0.0, 80.0, -80.0]))) == pytest.approx(1.0 + 2.0 * np.cos(np.radians(80.0)))
    with pytest.raises(EvenCount):
        vector_sum_bound(unit_vectors([0.0, 0.1]))
    with pytest.raises(AngleOutOfRange):
        vector_sum_bound(unit_vectors([0.0, np.pi / 2, 0.0]))
    with pytest.raises(AngleOutOfRange):
        vector_sum_bound(np.array([[2.0, 0.0]]))


@given(st.integers(min_value=0, max_value=4).flatmap(
    lambda k: st.lists(st.floats(min_value=-1.5, max_value=1.5), min_size=2 * k + 1, max_size=2 * k + 1)
))
@settings(deadline=None)
def test_odd_sums_in_a_half_plane_are_long(angles):
    assert vector_sum_bound(unit_vectors(angles)) >= 1.0 - 1e-9
