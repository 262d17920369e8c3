"""Tests for the polyline and mesh kernels."""

from __future__ import annotations

from hypothesis import assume, given, settings, strategies as st
import numpy as np
import pytest

from minmax_surfaces.ambient import gaussian_bump
from minmax_surfaces.geometry import (
    boundary_loops,
    cotangent_laplacian,
    disk_mesh,
    mesh_area_gradient,
    polyline_abs_curvature,
    polyline_mass_gradient,
    polyline_segment_masses,
    resample_polyline,
    revolve_profile,
    triangle_areas,
)

PHI = gaussian_bump()


@st.composite
def polylines(draw, n=6):
    coords = draw(
        st.lists(st.floats(min_value=-0.7, max_value=0.7, allow_nan=False), min_size=2 * n, max_size=2 * n)
    )
    verts = np.array(coords).reshape(n, 2)
    # keep segments away from zero length
    verts[:, 0] += np.linspace(-0.2, 0.2, n)
    return verts


@given(polylines())
@settings(deadline=None, max_examples=25)
def test_mass_gradient_matches_finite_differences(verts):
    assume(np.min(np.linalg.norm(np.diff(verts, axis=0), axis=1)) > 1e-2)
    grad = polyline_mass_gradient(verts, PHI)
    h = 1e-6
    numeric = np.zeros_like(verts)
    for i in range(verts.shape[0]):
        for k in range(2):
            up = verts.copy()
            down = verts.copy()
            up[i, k] += h
            down[i, k] -= h
            numeric[i, k] = (np.sum(polyline_segment_masses(up, PHI)) - np.sum(polyline_segment_masses(down, PHI))) / (2 * h)
    np.testing.assert_allclose(grad, numeric, atol=1e-5)


def test_closed_polyline_mass():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert np.sum(polyline_segment_masses(square, closed=True)) == pytest.approx(4.0)
    assert np.sum(polyline_segment_masses(square)) == pytest.approx(3.0)
    grad = polyline_mass_gradient(square, closed=True)
    assert grad.shape == square.shape
    np.testing.assert_allclose(grad[0], [-1.0, -1.0])


def test_resample_keeps_endpoints():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0]])
    out = resample_polyline(verts, 7)
    np.testing.assert_allclose(out[[0, -1]], verts[[0, -1]])
    np.testing.assert_allclose(np.linalg.norm(np.diff(out, axis=0), axis=1), 0.5)


def test_arc_curvature():
    theta = np.linspace(0.0, np.pi / 2, 201)
    verts = 2.0 * np.column_stack([np.cos(theta), np.sin(theta)])
    curvature = polyline_abs_curvature(verts)
    assert curvature[0] == 0.0 and curvature[-1] == 0.0
    np.testing.assert_allclose(curvature[1:-1], 0.5, rtol=1e-4)


def test_disk_mesh_area_and_boundary():
    vertices, faces = disk_mesh(1.0, 0.0, 8, 64)
    polygon = 0.5 * 64 * np.sin(2.0 * np.pi / 64)
    assert np.sum(triangle_areas(vertices, faces)) == pytest.approx(polygon, rel=1e-9)
    loops = boundary_loops(faces)
    assert len(loops) == 1
    np.testing.assert_allclose(np.linalg.norm(vertices[loops[0], :2], axis=1), 1.0)


def test_revolved_cylinder_has_two_boundary_loops():
    profile = np.column_stack([np.full(5, 0.5), np.linspace(1.0, -1.0, 5)])
    vertices, faces = revolve_profile(profile, 32)
    assert len(vertices) == 5 * 32
    assert len(boundary_loops(faces)) == 2
    polygon_perimeter = 32 * 2.0 * 0.5 * np.sin(np.pi / 32)
    assert np.sum(triangle_areas(vertices, faces)) == pytest.approx(2.0 * polygon_perimeter, rel=1e-9)


def test_consecutive_poles_carry_no_faces():
    profile = np.array([[0.5, 0.5], [0.0, 0.5], [0.0, -0.5], [0.5, -0.5]])
    vertices, faces = revolve_profile(profile, 16)
    assert len(vertices) == 2 * 16 + 2
    assert len(faces) == 2 * 16
    assert len(boundary_loops(faces)) == 2


def test_area_gradient_matches_finite_differences():
    vertices, faces = disk_mesh(1.0, 0.0, 3, 12)
    rng = np.random.default_rng(3)
    vertices = vertices + 0.05 * rng.standard_normal(vertices.shape)
    grad = mesh_area_gradient(vertices, faces)
    h = 1e-6
    for i in (0, 5, 17):
        for k in range(3):
            up = vertices.copy()
            down = vertices.copy()
            up[i, k] += h
            down[i, k] -= h
            numeric = (np.sum(triangle_areas(up, faces)) - np.sum(triangle_areas(down, faces))) / (2 * h)
            assert grad[i, k] == pytest.approx(numeric, abs=1e-6)


def test_cotangent_laplacian_rows_sum_to_zero():
    vertices, faces = disk_mesh(1.0, 0.0, 4, 16)
    laplacian = cotangent_laplacian(vertices, faces)
    np.testing.assert_allclose(np.asarray(laplacian.sum(axis=1)).ravel(), 0.0, atol=1e-12)
    # a flat mesh has zero mean curvature at interior vertices
    interior = np.linalg.norm(vertices[:, :2], axis=1) < 0.9
    np.testing.assert_allclose((laplacian @ vertices)[interior, 2], 0.0, atol=1e-12)
