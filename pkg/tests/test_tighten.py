"""Tests for first variation, stationarity and the pull-tight flow."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import chord, wiggly_chord
from minmax_surfaces.exceptions import ClassViolation, StepDiverged
from minmax_surfaces.geometry import disk_mesh
from minmax_surfaces.scenarios import catenoid_seed
from minmax_surfaces.sweepout import (
    BoundaryCondition,
    Slice,
    build_connecting_sweepout,
    build_level_set_sweepout,
    revolved_slice,
    slice_mass,
)
from minmax_surfaces.tighten import (
    TightenParams,
    VectorFieldClass,
    class_for_mode,
    first_variation,
    pull_tight,
    relax_slice,
    solve_stationary,
    stationarity_residual,
)


def circle(radius: float, n: int = 64) -> Slice:
    theta = 2.0 * np.pi * np.arange(n) / n
    return Slice(radius * np.column_stack([np.cos(theta), np.sin(theta)]), bc=BoundaryCondition.CLOSED)


def test_class_for_mode():
    assert class_for_mode("constrained") == VectorFieldClass.INWARD_VANISH_ON_GAMMA
    assert class_for_mode("unconstrained") == VectorFieldClass.TANGENT_TO_BOUNDARY


def test_circle_first_variation_is_length_over_radius(disk):
    s = circle(0.5)
    field = s.vertices / np.linalg.norm(s.vertices, axis=1, keepdims=True)
    expected = slice_mass(disk, s) / 0.5
    assert first_variation(disk, s, field, VectorFieldClass.VANISH_ON_BOUNDARY) == pytest.approx(expected, rel=1e-12)


def test_field_must_vanish_on_gamma(constrained_disk):
    s = chord((-1.0, 0.0), (1.0, 0.0))
    field = np.zeros_like(s.vertices)
    field[0] = [0.1, 0.0]
    with pytest.raises(ClassViolation):
        first_variation(constrained_disk, s, field, VectorFieldClass.INWARD_VANISH_ON_GAMMA)


def test_field_must_be_tangent_on_the_wall(disk):
    s = chord((-1.0, 0.0), (1.0, 0.0), bc=BoundaryCondition.FREE)
    field = np.zeros_like(s.vertices)
    field[-1] = [-0.1, 0.0]
    with pytest.raises(ClassViolation):
        first_variation(disk, s, field, VectorFieldClass.TANGENT_TO_BOUNDARY)
    field[-1] = [0.0, 0.1]
    assert first_variation(disk, s, field, VectorFieldClass.TANGENT_TO_BOUNDARY) == pytest.approx(0.0, abs=1e-12)


def test_field_shape_must_match(disk):
    s = chord((-1.0, 0.0), (1.0, 0.0))
    with pytest.raises(ClassViolation):
        first_variation(disk, s, np.zeros((3, 2)), VectorFieldClass.VANISH_ON_BOUNDARY)


def test_straight_chord_is_stationary(constrained_disk):
    s = chord((-1.0, 0.0), (1.0, 0.0))
    assert stationarity_residual(constrained_disk, s, VectorFieldClass.INWARD_VANISH_ON_GAMMA) < 1e-12
    assert stationarity_residual(constrained_disk, wiggly_chord(), VectorFieldClass.INWARD_VANISH_ON_GAMMA) > 0.1


def test_free_chord_meets_the_wall_orthogonally(disk):
    diameter = chord((-1.0, 0.0), (1.0, 0.0), bc=BoundaryCondition.FREE)
    assert stationarity_residual(disk, diameter, VectorFieldClass.TANGENT_TO_BOUNDARY) < 1e-12
    x = np.sqrt(1.0 - 0.3**2)
    tilted = chord((-x, 0.3), (x, 0.3), bc=BoundaryCondition.FREE)
    # the boundary row is the sine of the angle defect at the wall
    assert stationarity_residual(disk, tilted, VectorFieldClass.TANGENT_TO_BOUNDARY) == pytest.approx(0.3, rel=1e-6)


def test_trivial_slice_is_stationary(disk):
    assert stationarity_residual(disk, Slice(np.zeros((1, 2)), bc=BoundaryCondition.TRIVIAL), "tangent") == 0.0


def test_params():
    params = TightenParams.from_dict({"step_size": 0.25, "damping_width": 0.1})
    assert params.step_size == 0.25
    assert params.speed_cap(0.0) == 0.0
    assert 0.0 < params.speed_cap(1.0) < 1.0
    np.testing.assert_allclose(params.damping(np.array([0.0, 0.05, 0.5])), [0.0, 0.5, 1.0])
    assert TightenParams.from_dict(None).max_iters == 400


def test_pull_tight_keeps_a_tight_family(disk):
    family = build_level_set_sweepout(disk, resolution=17, n_vertices=9)
    tight, trace = pull_tight(disk, family)
    assert trace.converged
    assert trace.m0[-1] == pytest.approx(2.0, abs=1e-6)
    assert tight[0] is family[0] and tight[-1] is family[-1]
    assert trace.rows()[0]["argmax_t"] == "8"


def test_pull_tight_lowers_masses(bump, bump_geodesics):
    upper, lower = bump_geodesics
    family = build_connecting_sweepout(bump, upper, lower, resolution=9, n_vertices=33)
    before = family.masses(bump)
    tight, trace = pull_tight(bump, family, TightenParams(max_iters=15))
    after = tight.masses(bump)
    assert np.all(after <= before + 1e-12)
    assert np.all(np.diff(trace.m0) <= 1e-12)
    assert tight[0] is upper and tight[-1] is lower
    for s in tight.slices:
        np.testing.assert_array_equal(s.vertices[[0, -1]], upper.vertices[[0, -1]])


def test_relax_wiggly_chord(constrained_disk):
    relaxed = relax_slice(constrained_disk, wiggly_chord())
    assert slice_mass(constrained_disk, relaxed) == pytest.approx(2.0, abs=1e-8)
    np.testing.assert_array_equal(relaxed.vertices[[0, -1]], [[-1.0, 0.0], [1.0, 0.0]])


def test_relax_stable_catenoid_stays_put(ball):
    seed = catenoid_seed(ball, "stable", n_profile=21, n_theta=32)
    relaxed = relax_slice(ball, seed)
    assert slice_mass(ball, relaxed) <= slice_mass(ball, seed) + 1e-12
    assert slice_mass(ball, relaxed) == pytest.approx(slice_mass(ball, seed), rel=1e-3)
    np.testing.assert_allclose(relaxed.profile[[0, -1]], seed.profile[[0, -1]])


def test_relax_mesh_needs_a_3d_domain(disk):
    vertices, faces = disk_mesh(0.5, 0.0, 2, 8)
    with pytest.raises(StepDiverged):
        relax_slice(disk, Slice(vertices, faces, BoundaryCondition.FREE))


def test_straight_chord_over_the_bump_is_stationary(bump):
    # vertices crowd towards the ends; only the normal gradient counts
    x = -np.cos(np.pi * np.linspace(0.0, 1.0, 129))
    s = Slice(np.column_stack([x, np.zeros_like(x)]), bc=BoundaryCondition.CONSTRAINED)
    tol = 1e-3 * slice_mass(bump, s) / bump.diameter
    assert stationarity_residual(bump, s, VectorFieldClass.INWARD_VANISH_ON_GAMMA) < tol


def test_pull_tight_reaches_the_saddle_residual(bump, bump_geodesics):
    upper, lower = bump_geodesics
    family = build_connecting_sweepout(bump, upper, lower, resolution=17, n_vertices=65)
    before = family.masses(bump)
    tight, trace = pull_tight(bump, family, TightenParams(max_iters=60))
    after = tight.masses(bump)
    assert trace.converged
    assert np.all(after <= before + 1e-12)
    argmax = int(np.argmax(after))
    assert stationarity_residual(bump, tight[argmax], VectorFieldClass.INWARD_VANISH_ON_GAMMA) <= trace.residual_tol
    assert after[argmax] > max(after[0], after[-1])


def test_solve_stationary_finds_the_unstable_catenoid(ball):
    seed = catenoid_seed(ball, "unstable", n_profile=21, n_theta=32)
    profile = np.array(seed.profile)
    profile[1:-1, 0] *= 1.0 + 0.01 * np.sin(np.pi * np.linspace(0.0, 1.0, 21)[1:-1])
    bent = revolved_slice(profile, 32, BoundaryCondition.CONSTRAINED)
    cls = VectorFieldClass.INWARD_VANISH_ON_GAMMA
    solved = solve_stationary(ball, bent, cls)
    assert solved is not None
    tol = 1e-3 * slice_mass(ball, solved) / ball.diameter
    assert stationarity_residual(ball, solved, cls) < tol
    assert stationarity_residual(ball, bent, cls) > tol
    assert slice_mass(ball, solved) == pytest.approx(slice_mass(ball, seed), rel=1e-3)
    np.testing.assert_array_equal(solved.profile[[0, -1]], seed.profile[[0, -1]])


def test_solve_stationary_needs_held_ends(disk):
    free = chord((-1.0, 0.0), (1.0, 0.0), bc=BoundaryCondition.FREE)
    assert solve_stationary(disk, free, VectorFieldClass.TANGENT_TO_BOUNDARY) is None


def test_pull_tight_keeps_revolved_profiles(ball):
    seed = catenoid_seed(ball, "stable", n_profile=21, n_theta=32)
    other = catenoid_seed(ball, "unstable", n_profile=21, n_theta=32)
    family = build_connecting_sweepout(ball, seed, other, resolution=5, n_profile=21)
    tight, _ = pull_tight(ball, family, TightenParams(max_iters=3))
    middle = tight[2]
    assert middle.profile is not None and middle.n_theta == 32
    ring = middle.ring_offsets()[10]
    radius = np.linalg.norm(middle.vertices[ring : ring + 32, :2], axis=1)
    np.testing.assert_allclose(radius, middle.profile[10, 0], rtol=1e-6)
    np.testing.assert_allclose(middle.vertices[ring : ring + 32, 2], middle.profile[10, 1], atol=1e-7)
