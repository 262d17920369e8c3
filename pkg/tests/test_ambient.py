"""Tests for the ambient domain: boundary geometry, metric distance and loading."""

from __future__ import annotations

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from minmax_surfaces.ambient import (
    ConformalFactor,
    boundary_frame,
    boundary_normal_chart,
    distance_matrix,
    domain_from_dict,
    ellipse_domain,
    grid_distance,
    load_domain,
    metric_distance,
)
from minmax_surfaces.exceptions import (
    DomainError,
    NotUniformlyConvex,
    PointNotOnBoundary,
    PointOutsideDomain,
)
from minmax_surfaces.oracles import simpson_line_mass


@st.composite
def disk_points(draw, max_radius=0.9):
    r = draw(st.floats(min_value=0.0, max_value=max_radius, allow_nan=False))
    theta = draw(st.floats(min_value=0.0, max_value=2.0 * np.pi, allow_nan=False))
    return np.array([r * np.cos(theta), r * np.sin(theta)])


def test_ellipse_curvature(ellipse):
    """Curvature of x^2/4 + y^2 = 1 is a/b^2 at the vertex and b/a^2 at the co-vertex."""
    assert boundary_frame(ellipse, np.array([2.0, 0.0])).principal_curvatures[0] == pytest.approx(2.0, rel=1e-6)
    assert boundary_frame(ellipse, np.array([0.0, 1.0])).principal_curvatures[0] == pytest.approx(0.25, rel=1e-6)
    assert ellipse.convexity_modulus == pytest.approx(0.25, rel=1e-6)


def test_boundary_frame_normal_points_inside(ellipse):
    frame = boundary_frame(ellipse, np.array([2.0, 0.0]))
    np.testing.assert_allclose(frame.nu, [-1.0, 0.0], atol=1e-9)
    assert abs(float(frame.tangent_basis[0] @ frame.nu)) < 1e-12


def test_boundary_frame_ball(ball):
    frame = boundary_frame(ball, np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(frame.nu, [0.0, 0.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(frame.principal_curvatures, [1.0, 1.0], rtol=1e-9)
    assert frame.tangent_basis.shape == (2, 3)


def test_boundary_frame_rejects_interior_point(disk):
    with pytest.raises(PointNotOnBoundary):
        boundary_frame(disk, np.array([0.5, 0.0]))


def test_conformal_curvature_of_the_boundary():
    """A constant factor c scales the geodesic curvature of the unit circle to e^-c."""
    phi = ConformalFactor(np.full((8, 8), 0.5), (-1.5, -1.5), (3.0 / 7.0, 3.0 / 7.0))
    domain = ellipse_domain(1.0, 1.0, phi=phi)
    assert domain.convexity_modulus == pytest.approx(np.exp(-0.5), rel=1e-9)


def test_flat_distance_is_euclidean(disk):
    x = np.array([-0.5, 0.2])
    y = np.array([0.3, -0.4])
    assert metric_distance(disk, x, y) == pytest.approx(np.linalg.norm(x - y))


def test_constant_factor_scales_distance():
    phi = ConformalFactor(np.full((8, 8), 0.5), (-1.5, -1.5), (3.0 / 7.0, 3.0 / 7.0))
    domain = ellipse_domain(1.0, 1.0, phi=phi)
    assert metric_distance(domain, np.array([0.0, 0.0]), np.array([0.5, 0.0])) == pytest.approx(0.5 * np.exp(0.5))


def test_point_outside_domain(disk):
    with pytest.raises(PointOutsideDomain):
        metric_distance(disk, np.array([0.0, 0.0]), np.array([1.5, 0.0]))


def test_bump_distance_goes_around_the_bump(bump):
    x = np.array([-0.9, 0.0])
    y = np.array([0.9, 0.0])
    d = metric_distance(bump, x, y)
    straight = simpson_line_mass(bump, np.vstack([x, y]), samples=201)
    assert 1.8 < d < straight


def test_bump_distance_is_symmetric(bump):
    x = np.array([-0.7, 0.1])
    y = np.array([0.6, -0.2])
    assert metric_distance(bump, x, y) == metric_distance(bump, y, x)


@given(disk_points(), disk_points(), disk_points())
@settings(deadline=None, max_examples=10)
def test_bump_triangle_inequality(bump, x, y, z):
    dxz = metric_distance(bump, x, z)
    dxy = metric_distance(bump, x, y)
    dyz = metric_distance(bump, y, z)
    assert dxz <= dxy + dyz + 1e-2 * max(dxz, 1e-3)


@given(disk_points(), disk_points())
@settings(deadline=None, max_examples=10)
def test_bump_distance_bounds(bump, x, y):
    """phi >= 0 makes paths no shorter than in the flat disk."""
    d = metric_distance(bump, x, y)
    assert d >= np.linalg.norm(x - y) - 1e-9
    assert d <= grid_distance(bump, x, y) + 1e-9


def test_distance_matrix_flat(disk):
    points = np.array([[0.0, 0.0], [0.3, 0.4], [-0.6, 0.0]])
    matrix = distance_matrix(disk, points)
    np.testing.assert_allclose(matrix, matrix.T)
    assert matrix[0, 1] == pytest.approx(0.5)
    assert np.all(np.diag(matrix) == 0.0)


def test_boundary_normal_chart_round_trip(disk):
    chart = boundary_normal_chart(disk, np.array([1.0, 0.0]))
    points = np.array([[0.9, 0.1], [0.95, -0.05], [1.0, 0.0]])
    coords = chart.to_chart(points)
    assert np.all(coords[:, 1] >= -1e-12)
    np.testing.assert_allclose(chart.from_chart(coords), points, atol=1e-9)


def test_interior_chart_is_linear(bump):
    y = np.array([0.1, 0.2])
    chart = boundary_normal_chart(bump, y)
    np.testing.assert_allclose(chart.to_chart(y), [0.0, 0.0])
    np.testing.assert_allclose(chart.from_chart(chart.to_chart(np.array([0.3, 0.1]))), [0.3, 0.1])


def test_gamma_separation(ball):
    assert ball.gamma.separation == pytest.approx(0.8, rel=1e-6)
    assert ball.gamma.inverse_separation == pytest.approx(1.25, rel=1e-6)


def test_domain_from_dict_ellipse_with_bump():
    domain = domain_from_dict(
        {"mode": "planar2d", "boundary": {"kind": "ellipse", "semi_axes": [1.0, 1.0]}, "phi": {"height": 1.0}, "gamma": [[-1.0, 0.0], [1.0, 0.0]]}
    )
    assert not domain.is_flat
    assert domain.phi_value(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0, rel=1e-6)
    assert len(domain.gamma.components) == 2


def test_domain_from_dict_ball_heights():
    domain = domain_from_dict({"mode": "body3d", "semi_axes": [1.0, 1.0, 1.0], "gamma": [0.4, -0.4]})
    assert domain.dim == 3
    assert domain.gamma.components[0].radius == pytest.approx(np.sqrt(0.84))


def test_domain_round_trip_through_dict(ellipse):
    again = load_domain(ellipse.to_dict())
    assert again.diameter == pytest.approx(ellipse.diameter)
    assert again.boundary.a == 2.0


def test_gamma_off_boundary():
    with pytest.raises(PointNotOnBoundary):
        domain_from_dict({"mode": "planar2d", "gamma": [[0.5, 0.0]]})


def test_dented_spline_is_not_convex():
    theta = 2.0 * np.pi * np.arange(12) / 12
    radius = np.ones(12)
    radius[3] = 0.5
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    with pytest.raises(NotUniformlyConvex):
        domain_from_dict({"mode": "planar2d", "boundary": {"kind": "spline", "control_points": points.tolist()}})


def test_phi_grid_must_cover_domain():
    grid = {"nx": 4, "ny": 4, "origin": [-0.5, -0.5], "spacing": [0.1, 0.1], "values": [0.1] * 16}
    with pytest.raises(DomainError):
        domain_from_dict({"mode": "planar2d", "phi_grid": grid})


def test_unknown_mode():
    with pytest.raises(DomainError):
        domain_from_dict({"mode": "planar4d"})


def test_load_domain_from_file(tmp_path):
    path = tmp_path / "domain.json"
    path.write_text('{"mode": "planar2d", "boundary": {"semi_axes": [2.0, 1.0]}}', encoding="utf-8")
    assert load_domain(path).diameter == pytest.approx(4.0, rel=1e-6)
