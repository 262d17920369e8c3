"""Tests for slices, sweepout families and their builders."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import chord, wiggly_chord
from minmax_surfaces.const import CONSTRAINED, UNCONSTRAINED
from minmax_surfaces.exceptions import (
    DegenerateGeometry,
    EmptyFamily,
    IncompatibleSlices,
    NoCommonBoundary,
    NotDisjoint,
    SweepoutError,
)
from minmax_surfaces.scenarios import arc_seed, catenoid_seed, disks_seed
from minmax_surfaces.sweepout import (
    BoundaryCondition,
    Slice,
    SweepoutFamily,
    build_connecting_sweepout,
    build_level_set_sweepout,
    level_set_curves,
    minmax_report,
    polyline_distance,
    slice_mass,
    trivial_slice,
    validate_family,
)


def test_slice_rejects_bad_arrays():
    with pytest.raises(DegenerateGeometry):
        Slice(np.array([[0.0, np.nan], [1.0, 0.0]]))
    with pytest.raises(DegenerateGeometry):
        Slice(np.zeros((3, 3)), faces=np.array([[0, 1, 3]]))
    with pytest.raises(DegenerateGeometry):
        Slice(np.zeros((2, 2)), multiplicity=0)


def test_slice_is_immutable():
    s = chord((-1.0, 0.0), (1.0, 0.0))
    with pytest.raises(ValueError):
        s.vertices[0, 0] = 5.0


def test_slice_dict_round_trip():
    s = Slice(np.array([[0.0, 0.0], [0.5, 0.1]]), bc=BoundaryCondition.FREE, multiplicity=2)
    again = Slice.from_dict(s.to_dict())
    np.testing.assert_array_equal(again.vertices, s.vertices)
    assert again.bc == BoundaryCondition.FREE
    assert again.multiplicity == 2


def test_trivial_slice_has_no_mass(disk):
    point = trivial_slice(np.array([1.0, 0.0]))
    assert point.is_trivial
    assert slice_mass(disk, point) == 0.0
    assert len(point.boundary_indices()) == 0


def test_multiplicity_scales_mass(disk):
    s = chord((-1.0, 0.0), (1.0, 0.0))
    double = Slice(s.vertices, bc=s.bc, multiplicity=2)
    assert slice_mass(disk, double) == pytest.approx(2.0 * slice_mass(disk, s))


def test_mass_dimension_mismatch(ball):
    with pytest.raises(DegenerateGeometry):
        slice_mass(ball, chord((-1.0, 0.0), (1.0, 0.0)))


def test_family_boundary_mask_two_parameters():
    s = trivial_slice(np.zeros(2))
    family = SweepoutFamily(np.full((3, 3), s, dtype=object))
    assert family.k == 2
    mask = family.boundary_mask()
    assert mask.sum() == 8
    assert not mask[1, 1]
    np.testing.assert_allclose(family.parameter((1, 2)), [0.5, 1.0])


def test_family_replace_keeps_original():
    a = trivial_slice(np.zeros(2))
    b = trivial_slice(np.ones(2))
    family = SweepoutFamily.from_list([a, a, a])
    changed = family.replace({(1,): b})
    assert family[1] is a
    assert changed[1] is b


def test_family_rejects_unknown_mode():
    with pytest.raises(SweepoutError):
        SweepoutFamily.from_list([trivial_slice(np.zeros(2))], "sideways")


def test_empty_family():
    with pytest.raises(EmptyFamily):
        minmax_report(None, SweepoutFamily.from_list([]))


def test_disk_level_set_sweepout(disk):
    family = build_level_set_sweepout(disk, resolution=129, n_vertices=17)
    assert family.mode == UNCONSTRAINED
    assert family[0].is_trivial and family[-1].is_trivial
    report = minmax_report(disk, family)
    assert report.m0 == pytest.approx(2.0, abs=1e-9)
    assert report.argmax_t == (64,)
    assert report.bM0 == 0.0
    assert report.passes_condition
    validation = validate_family(disk, family)
    assert validation.passed, validation.failures


def test_ellipse_width_sweep(ellipse):
    family = build_level_set_sweepout(ellipse, sweep_axis=0, resolution=65, n_vertices=9)
    assert minmax_report(ellipse, family).m0 == pytest.approx(2.0, abs=1e-9)


def test_ball_level_set_sweepout(ball):
    family = build_level_set_sweepout(ball, resolution=9, n_rings=4, n_theta=48)
    assert all(s.bc == BoundaryCondition.FREE for s in family.slices[1:-1])
    polygon = 0.5 * 48 * np.sin(2.0 * np.pi / 48)
    assert minmax_report(ball, family).m0 == pytest.approx(polygon, rel=1e-9)


def test_constrained_family_needs_constrained_slices(disk):
    family = build_level_set_sweepout(disk, resolution=17, n_vertices=9)
    relabelled = SweepoutFamily(family.slices, CONSTRAINED)
    assert "slices" in validate_family(disk, relabelled).failures


def test_discontinuous_family_is_reported(constrained_disk):
    upper = chord((-1.0, 0.0), (1.0, 0.0))
    tent = np.vstack([chord((-1.0, 0.0), (0.0, 0.9)).vertices, chord((0.0, 0.9), (1.0, 0.0)).vertices[1:]])
    far = Slice(tent, bc=BoundaryCondition.CONSTRAINED)
    report = validate_family(constrained_disk, SweepoutFamily.from_list([upper, far]))
    assert not report.checks["continuity"].passed
    assert report.checks["continuity"].worst_pair == ((0,), (1,))


def test_connecting_sweepout_crosses_the_bump(bump, bump_geodesics):
    upper, lower = bump_geodesics
    family = build_connecting_sweepout(bump, upper, lower, resolution=17, n_vertices=65)
    assert family.mode == CONSTRAINED
    assert family[0] is upper and family[-1] is lower
    report = minmax_report(bump, family)
    assert report.passes_condition
    assert 0 < report.argmax_t[0] < 16
    assert validate_family(bump, family).checks["slices"].passed


def test_connecting_same_slice_is_constant(constrained_disk):
    s = chord((-1.0, 0.0), (1.0, 0.0))
    family = build_connecting_sweepout(constrained_disk, s, s, resolution=5)
    assert all(item is s for item in family.slices)
    assert not minmax_report(constrained_disk, family).passes_condition


def test_connecting_crossing_slices(constrained_disk):
    with pytest.raises(NotDisjoint):
        build_connecting_sweepout(
            constrained_disk, chord((-1.0, 0.0), (1.0, 0.0)), wiggly_chord(), resolution=5, n_vertices=65
        )


def test_connecting_needs_common_boundary(constrained_disk):
    with pytest.raises(NoCommonBoundary):
        build_connecting_sweepout(constrained_disk, chord((-1.0, 0.0), (1.0, 0.0)), chord((0.0, -1.0), (0.0, 1.0)))


def test_connecting_needs_matching_boundary_condition(constrained_disk):
    free = chord((-1.0, 0.0), (1.0, 0.0), bc=BoundaryCondition.FREE)
    with pytest.raises(IncompatibleSlices):
        build_connecting_sweepout(constrained_disk, chord((-1.0, 0.0), (0.0, 1.0)), free)


def test_catenoid_to_disks_sweepout(ball):
    stable = catenoid_seed(ball, "stable", n_profile=21, n_theta=32)
    disks = disks_seed(ball, n_profile=21, n_theta=32)
    family = build_connecting_sweepout(ball, stable, disks, resolution=17, n_profile=21)
    masses = family.masses(ball)
    assert masses[0] == pytest.approx(4.449, rel=1e-2)
    assert masses[-1] == pytest.approx(2.0 * np.pi * 0.84, rel=1e-2)
    report = minmax_report(ball, family, masses=masses)
    assert report.passes_condition
    assert report.m0 > 5.3


def test_level_set_curves_follow_the_distance_ratio(constrained_disk):
    upper = arc_seed(constrained_disk, (0.0, 0.6), 65).vertices
    lower = arc_seed(constrained_disk, (0.0, -0.6), 65).vertices
    curves = level_set_curves(upper, lower, [0.25, 0.5], collar=0.2, tilt=0.0)
    assert curves.shape == (2, 65, 2)
    np.testing.assert_array_equal(curves[:, [0, -1]], np.broadcast_to(upper[[0, -1]], (2, 2, 2)))
    # mirror images meet their level set 1/2 on the axis of symmetry
    assert np.max(np.abs(curves[1, :, 1])) < 1e-9
    anchor = np.min(np.linalg.norm(upper[:, None, :] - upper[None, [0, -1], :], axis=2), axis=1)
    bulk = anchor >= 0.2
    d0 = polyline_distance(curves[0, bulk], upper)
    d1 = polyline_distance(curves[0, bulk], lower)
    np.testing.assert_allclose(d0 / (d0 + d1), 0.25, atol=1e-9)


def test_level_set_tilt_is_small_and_breaks_ties(constrained_disk):
    upper = arc_seed(constrained_disk, (0.0, 0.6), 65).vertices
    lower = arc_seed(constrained_disk, (0.0, -0.6), 65).vertices
    flat = level_set_curves(upper, lower, [0.5], collar=0.2, tilt=0.0)
    tilted = level_set_curves(upper, lower, [0.5], collar=0.2, tilt=1e-6)
    shift = np.max(np.abs(tilted - flat))
    assert 0.0 < shift < 1e-4


def test_polyline_distance():
    line = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    points = np.array([[0.5, 0.5], [2.0, 0.5], [-1.0, 0.0]])
    np.testing.assert_allclose(polyline_distance(points, line), [0.5, 1.0, 1.0])


def test_connecting_sweepout_is_symmetric_over_the_bump(bump, bump_geodesics):
    upper, lower = bump_geodesics
    family = build_connecting_sweepout(bump, upper, lower, resolution=9, n_vertices=65)
    for k in range(1, 4):
        np.testing.assert_allclose(family[k].vertices[:, 1], -family[8 - k].vertices[:, 1], atol=1e-4)
    assert np.max(np.abs(family[4].vertices[:, 1])) < 1e-4
