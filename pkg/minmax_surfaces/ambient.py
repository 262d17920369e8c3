"""Ambient manifold: convex planar region with a conformal metric, or a convex body."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import json
import logging
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from scipy import optimize, sparse
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.sparse.csgraph import dijkstra

from .const import (
    BOUNDARY_SAMPLES_2D,
    BOUNDARY_SAMPLES_3D,
    DEFAULT_DISTANCE_GRID,
    DEFAULT_TOL_BDRY,
    MODE_BODY_3D,
    MODE_PLANAR_2D,
)
from .exceptions import (
    DegenerateGeometry,
    DomainError,
    NotUniformlyConvex,
    PointNotOnBoundary,
    PointOutsideDomain,
)
from .geometry import polyline_mass_gradient, polyline_segment_masses, resample_polyline

_LOGGER = logging.getLogger(__name__)

# 16-neighbour stencil used by the distance graph
_STENCIL = [
    (1, 0), (0, 1), (1, 1), (1, -1),
    (1, 2), (2, 1), (1, -2), (2, -1),
]


class BoundaryFrame(NamedTuple):
    """Inward normal, tangent basis and principal curvatures at a boundary point."""

    nu: np.ndarray
    tangent_basis: np.ndarray
    principal_curvatures: np.ndarray


# ---------------------------------------------------------------------------
# conformal factor


class ConformalFactor:
    """Scalar field phi on a regular grid, metric g = exp(2 phi) * euclidean.

    Values are stored row-major: ``values[j * nx + i]`` is phi at
    ``(origin_x + i * spacing_x, origin_y + j * spacing_y)``.
    """

    def __init__(
        self,
        values: np.ndarray,
        origin: tuple[float, float],
        spacing: tuple[float, float],
    ) -> None:
        """Initialize from a (ny, nx) grid."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 4:
            raise DomainError("phi grid must be 2-D with at least 4 samples per axis")
        self.values = values
        self.origin = (float(origin[0]), float(origin[1]))
        self.spacing = (float(spacing[0]), float(spacing[1]))
        self.ny, self.nx = values.shape
        self.xs = self.origin[0] + self.spacing[0] * np.arange(self.nx)
        self.ys = self.origin[1] + self.spacing[1] * np.arange(self.ny)
        self.is_constant = bool(np.all(values == values.flat[0]))
        self.constant = float(values.flat[0]) if self.is_constant else None
        self._spline = None if self.is_constant else RectBivariateSpline(self.ys, self.xs, values)

    @classmethod
    def from_function(cls, func, bounds: tuple[float, float, float, float], n: int) -> ConformalFactor:
        """Sample func(x, y) on an n x n grid over (xmin, xmax, ymin, ymax)."""
        xmin, xmax, ymin, ymax = bounds
        xs = np.linspace(xmin, xmax, n)
        ys = np.linspace(ymin, ymax, n)
        grid_x, grid_y = np.meshgrid(xs, ys)
        return cls(func(grid_x, grid_y), (xmin, ymin), (xs[1] - xs[0], ys[1] - ys[0]))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ConformalFactor:
        """Build from the JSON grid description."""
        nx, ny = int(data["nx"]), int(data["ny"])
        values = np.asarray(data["values"], dtype=float)
        if values.size != nx * ny:
            raise DomainError(f"phi grid has {values.size} values, expected {nx * ny}")
        return cls(values.reshape(ny, nx), tuple(data["origin"]), tuple(data["spacing"]))

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON grid description."""
        return {
            "nx": self.nx,
            "ny": self.ny,
            "origin": list(self.origin),
            "spacing": list(self.spacing),
            "values": self.values.ravel().tolist(),
        }

    @property
    def is_flat(self) -> bool:
        """Return True when the metric is Euclidean."""
        return self.is_constant and self.constant == 0.0

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """Return the grid rectangle."""
        return (self.xs[0], self.xs[-1], self.ys[0], self.ys[-1])

    def _split(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        flat = points.reshape(-1, 2)
        return flat[:, 0], flat[:, 1], shape

    def value(self, points: np.ndarray) -> np.ndarray:
        """Evaluate phi at points of shape (..., 2)."""
        x, y, shape = self._split(points)
        if self.is_constant:
            return np.full(shape, self.constant)
        return self._spline.ev(y, x).reshape(shape)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Evaluate grad phi at points of shape (..., 2)."""
        x, y, shape = self._split(points)
        if self.is_constant:
            return np.zeros(shape + (2,))
        gx = self._spline.ev(y, x, dx=0, dy=1)
        gy = self._spline.ev(y, x, dx=1, dy=0)
        return np.stack([gx, gy], axis=-1).reshape(shape + (2,))

    def laplacian(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the Euclidean Laplacian of phi."""
        x, y, shape = self._split(points)
        if self.is_constant:
            return np.zeros(shape)
        return (self._spline.ev(y, x, dx=2, dy=0) + self._spline.ev(y, x, dx=0, dy=2)).reshape(shape)

    def gauss_curvature(self, points: np.ndarray) -> np.ndarray:
        """Return the Gaussian curvature -exp(-2 phi) * lap(phi) of the metric."""
        return -np.exp(-2.0 * self.value(points)) * self.laplacian(points)


# ---------------------------------------------------------------------------
# boundary curves and surfaces


class PlanarBoundary:
    """Closed, counter-clockwise parametrised convex curve."""

    period: float = 2.0 * np.pi

    def point(self, t: np.ndarray) -> np.ndarray:
        """Return boundary points at parameters t."""
        raise NotImplementedError

    def derivative(self, t: np.ndarray) -> np.ndarray:
        """Return the first parameter derivative."""
        raise NotImplementedError

    def second_derivative(self, t: np.ndarray) -> np.ndarray:
        """Return the second parameter derivative."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON description."""
        raise NotImplementedError

    def curvature(self, t: np.ndarray) -> np.ndarray:
        """Return the Euclidean curvature with respect to the inward normal."""
        d1 = self.derivative(t)
        d2 = self.second_derivative(t)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    def tangent(self, t: np.ndarray) -> np.ndarray:
        """Return the unit tangent."""
        d1 = self.derivative(t)
        return d1 / np.linalg.norm(d1, axis=-1, keepdims=True)

    def inward_normal(self, t: np.ndarray) -> np.ndarray:
        """Return the unit inward normal (tangent rotated by +90 degrees)."""
        tan = self.tangent(t)
        return np.stack([-tan[..., 1], tan[..., 0]], axis=-1)

    def samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Return n equally spaced parameters and their points."""
        t = self.period * np.arange(n) / n
        return t, self.point(t)

    def closest_parameter(self, points: np.ndarray) -> np.ndarray:
        """Return the parameter of the closest boundary point to each point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        t_grid, p_grid = self.samples(256)
        d2 = np.sum((points[:, None, :] - p_grid[None, :, :]) ** 2, axis=2)
        t = t_grid[np.argmin(d2, axis=1)]
        for _ in range(20):
            diff = self.point(t) - points
            d1 = self.derivative(t)
            d2v = self.second_derivative(t)
            f = np.sum(diff * d1, axis=1)
            fp = np.sum(d1 * d1, axis=1) + np.sum(diff * d2v, axis=1)
            step = np.where(fp > 0.0, f / np.where(fp > 0.0, fp, 1.0), 0.0)
            step = np.clip(step, -0.1 * self.period, 0.1 * self.period)
            t = t - step
            if np.max(np.abs(step)) < 1e-15 * self.period:
                break
        return np.mod(t, self.period)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Return Euclidean distance to the boundary, positive inside."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        t = self.closest_parameter(points)
        diff = points - self.point(t)
        dist = np.linalg.norm(diff, axis=1)
        side = np.sum(diff * self.inward_normal(t), axis=1)
        return np.where(side >= 0.0, dist, -dist)

    def bounding_box(self) -> tuple[float, float, float, float]:
        """Return (xmin, xmax, ymin, ymax) of the boundary."""
        _, pts = self.samples(BOUNDARY_SAMPLES_2D * 2)
        return (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max())


class EllipseBoundary(PlanarBoundary):
    """Ellipse with semi-axes (a, b), rotated by ``rotation`` around ``center``."""

    def __init__(self, a: float, b: float, center=(0.0, 0.0), rotation: float = 0.0) -> None:
        """Initialize the ellipse."""
        if a <= 0.0 or b <= 0.0:
            raise DomainError(f"Ellipse semi-axes must be positive, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)
        self.center = np.asarray(center, dtype=float)
        self.rotation = float(rotation)
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        self._rot = np.array([[c, -s], [s, c]])

    def _world(self, local: np.ndarray) -> np.ndarray:
        return local @ self._rot.T

    def point(self, t):
        t = np.asarray(t, dtype=float)
        local = np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)
        return self._world(local) + self.center

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self._world(np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1))

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self._world(np.stack([-self.a * np.cos(t), -self.b * np.sin(t)], axis=-1))

    def curvature(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.a, self.b
        return a * b / (a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2) ** 1.5

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "ellipse",
            "semi_axes": [self.a, self.b],
            "center": self.center.tolist(),
            "rotation": self.rotation,
        }


class SplineBoundary(PlanarBoundary):
    """Closed periodic cubic spline through control points (chord-length parameter)."""

    period = 1.0

    def __init__(self, control_points: np.ndarray) -> None:
        """Initialize from control points; orientation is made counter-clockwise."""
        pts = np.asarray(control_points, dtype=float)
        if len(pts) < 4:
            raise DegenerateGeometry("Spline boundary needs at least 4 control points")
        x, y = pts[:, 0], pts[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area < 0.0:
            pts = pts[::-1]
        self.control_points = pts
        closed = np.vstack([pts, pts[:1]])
        chord = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        knots = np.concatenate([[0.0], np.cumsum(chord)]) / np.sum(chord)
        self._spline = CubicSpline(knots, closed, bc_type="periodic")

    def point(self, t):
        return self._spline(np.mod(t, 1.0))

    def derivative(self, t):
        return self._spline(np.mod(t, 1.0), 1)

    def second_derivative(self, t):
        return self._spline(np.mod(t, 1.0), 2)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "spline", "control_points": self.control_points.tolist()}


class EllipsoidBoundary:
    """Axis-aligned ellipsoid sum((x_i - c_i) / a_i)^2 = 1."""

    def __init__(self, semi_axes, center=(0.0, 0.0, 0.0)) -> None:
        """Initialize the ellipsoid."""
        self.semi_axes = np.asarray(semi_axes, dtype=float)
        if self.semi_axes.shape != (3,) or np.any(self.semi_axes <= 0.0):
            raise DomainError(f"Ellipsoid needs three positive semi-axes, got {semi_axes}")
        self.center = np.asarray(center, dtype=float)
        self.is_sphere = bool(np.all(self.semi_axes == self.semi_axes[0]))

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON description."""
        return {"kind": "ellipsoid", "semi_axes": self.semi_axes.tolist(), "center": self.center.tolist()}

    def implicit(self, points: np.ndarray) -> np.ndarray:
        """Return F(x) = sum(u_i^2 / a_i^2) - 1."""
        u = np.atleast_2d(points) - self.center
        return np.sum((u / self.semi_axes) ** 2, axis=1) - 1.0

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Return grad F."""
        u = np.atleast_2d(points) - self.center
        return 2.0 * u / self.semi_axes**2

    def inward_normal(self, points: np.ndarray) -> np.ndarray:
        """Return the unit inward normal at boundary points."""
        g = self.gradient(points)
        return -g / np.linalg.norm(g, axis=1, keepdims=True)

    def shape_operator(self, point: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (nu, tangent basis, principal curvatures) at a boundary point."""
        nu = self.inward_normal(point)[0]
        helper = np.eye(3)[np.argmin(np.abs(nu))]
        e1 = np.cross(nu, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(nu, e1)
        basis = np.stack([e1, e2])
        hess = 2.0 * np.diag(1.0 / self.semi_axes**2)
        grad_norm = np.linalg.norm(self.gradient(point)[0])
        form = basis @ hess @ basis.T / grad_norm
        curvatures, vectors = np.linalg.eigh(form)
        return nu, vectors.T @ basis, curvatures

    def closest_point(self, points: np.ndarray) -> np.ndarray:
        """Return the closest boundary point to each point."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        u = points - self.center
        a2 = self.semi_axes**2
        if self.is_sphere:
            norm = np.linalg.norm(u, axis=1, keepdims=True)
            safe = np.where(norm > 0.0, u / np.maximum(norm, 1e-300), np.array([0.0, 0.0, 1.0]))
            return self.center + self.semi_axes[0] * safe
        out = np.empty_like(u)
        for k, ui in enumerate(u):
            out[k] = self._closest_one(ui, a2)
        return self.center + out

    def _closest_one(self, u: np.ndarray, a2: np.ndarray) -> np.ndarray:
        def g(s):
            return np.sum(u**2 * a2 / (a2 + s) ** 2) - 1.0

        lo = -np.min(a2) * (1.0 - 1e-14)
        if g(lo) < 0.0:
            # medial point: the minimal axis coordinate vanishes
            k = int(np.argmin(a2))
            y = u * a2 / (a2 - np.min(a2) + 1e-300)
            y[k] = 0.0
            rest = 1.0 - np.sum(y**2 / a2)
            y[k] = np.sqrt(max(rest, 0.0) * a2[k])
            return y
        hi = 1.0
        while g(hi) > 0.0:
            hi *= 2.0
        s = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)
        return u * a2 / (a2 + s)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Return Euclidean distance to the boundary, positive inside."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        dist = np.linalg.norm(points - self.closest_point(points), axis=1)
        return np.where(self.implicit(points) <= 0.0, dist, -dist)

    def parametric_grid(self, n: int) -> np.ndarray:
        """Return an n x n latitude/longitude sample of boundary points."""
        theta = np.linspace(0.0, np.pi, n)
        lon = 2.0 * np.pi * np.arange(n) / n
        tt, ll = np.meshgrid(theta, lon, indexing="ij")
        unit = np.stack([np.sin(tt) * np.cos(ll), np.sin(tt) * np.sin(ll), np.cos(tt)], axis=-1)
        return self.center + unit.reshape(-1, 3) * self.semi_axes


# ---------------------------------------------------------------------------
# gamma


class GammaPoint:
    """A boundary point of gamma (planar mode)."""

    def __init__(self, point) -> None:
        """Initialize the point."""
        self.point = np.asarray(point, dtype=float)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Return the distance of points to this component."""
        return np.linalg.norm(np.atleast_2d(points) - self.point, axis=1)

    def samples(self, n: int = 1) -> np.ndarray:
        """Return sample points."""
        return self.point[None, :]

    def to_dict(self) -> list[float]:
        """Return the JSON description."""
        return self.point.tolist()


class GammaCircle:
    """A planar circle of gamma on a boundary surface."""

    def __init__(self, center, axis, radius: float) -> None:
        """Initialize the circle."""
        self.center = np.asarray(center, dtype=float)
        axis = np.asarray(axis, dtype=float)
        self.axis = axis / np.linalg.norm(axis)
        self.radius = float(radius)
        helper = np.eye(3)[np.argmin(np.abs(self.axis))]
        e1 = np.cross(self.axis, helper)
        self._e1 = e1 / np.linalg.norm(e1)
        self._e2 = np.cross(self.axis, self._e1)

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Return the exact distance of points to the circle."""
        rel = np.atleast_2d(points) - self.center
        height = rel @ self.axis
        radial = np.linalg.norm(rel - height[:, None] * self.axis, axis=1)
        return np.hypot(radial - self.radius, height)

    def samples(self, n: int = 256) -> np.ndarray:
        """Return n points along the circle."""
        theta = 2.0 * np.pi * np.arange(n) / n
        return self.center + self.radius * (
            np.cos(theta)[:, None] * self._e1 + np.sin(theta)[:, None] * self._e2
        )

    def curvature(self) -> float:
        """Return the curvature of the circle as a space curve."""
        return 1.0 / self.radius

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON description."""
        return {"center": self.center.tolist(), "axis": self.axis.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class BoundaryConstraint:
    """The fixed boundary gamma on the boundary of M; may be empty."""

    components: tuple = ()

    @property
    def is_empty(self) -> bool:
        """Return True for unconstrained problems."""
        return len(self.components) == 0

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Return the distance of points to gamma (inf when empty)."""
        points = np.atleast_2d(points)
        if self.is_empty:
            return np.full(len(points), np.inf)
        return np.min(np.stack([c.distance(points) for c in self.components]), axis=0)

    @cached_property
    def separation(self) -> float:
        """Return the minimum distance between distinct components (inf if single)."""
        best = np.inf
        for i, first in enumerate(self.components):
            for second in self.components[i + 1 :]:
                best = min(best, float(np.min(second.distance(first.samples(512)))))
        return best

    @property
    def inverse_separation(self) -> float:
        """Return D with D^-1 the component separation (0 for a single component)."""
        return 0.0 if not np.isfinite(self.separation) else 1.0 / self.separation

    def samples(self, n: int = 256) -> np.ndarray:
        """Return sample points of every component."""
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate([c.samples(n) for c in self.components])


# ---------------------------------------------------------------------------
# charts


class LinearChart:
    """Euclidean chart x_e = exp(phi(y)) * (x - y), the metric is identity at y."""

    def __init__(self, center: np.ndarray, scale: float) -> None:
        """Initialize the chart."""
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)

    def to_chart(self, points: np.ndarray) -> np.ndarray:
        """Map ambient points to chart coordinates."""
        return self.scale * (np.asarray(points) - self.center)

    def from_chart(self, coords: np.ndarray) -> np.ndarray:
        """Map chart coordinates to ambient points."""
        return self.center + np.asarray(coords) / self.scale


class BoundaryNormalChart:
    """Chart (s, t) -> P(t0 + s / |P'(t0)|) + t * nu near a boundary point.

    Coordinates are scaled by exp(phi(y)) so the metric is identity at y;
    the half plane t >= 0 is the inside of M.
    """

    def __init__(self, boundary: PlanarBoundary, t0: float, scale: float) -> None:
        """Initialize the chart at parameter t0."""
        self.boundary = boundary
        self.t0 = float(t0)
        self.speed = float(np.linalg.norm(boundary.derivative(np.array([t0]))[0]))
        self.scale = float(scale)
        self.center = boundary.point(np.array([t0]))[0]

    def to_chart(self, points: np.ndarray) -> np.ndarray:
        """Map ambient points to chart coordinates."""
        points = np.asarray(points, dtype=float)
        flat = points.reshape(-1, 2)
        t = self.boundary.closest_parameter(flat)
        period = self.boundary.period
        offset = np.mod(t - self.t0 + 0.5 * period, period) - 0.5 * period
        foot = self.boundary.point(t)
        depth = np.sum((flat - foot) * self.boundary.inward_normal(t), axis=1)
        coords = np.column_stack([offset * self.speed, depth]) * self.scale
        return coords.reshape(points.shape)

    def from_chart(self, coords: np.ndarray) -> np.ndarray:
        """Map chart coordinates to ambient points."""
        coords = np.asarray(coords, dtype=float)
        flat = coords.reshape(-1, 2) / self.scale
        t = self.t0 + flat[:, 0] / self.speed
        pts = self.boundary.point(t) + flat[:, 1:2] * self.boundary.inward_normal(t)
        return pts.reshape(coords.shape)


# ---------------------------------------------------------------------------
# domain


@dataclass(frozen=True, eq=False)
class AmbientDomain:
    """The ambient manifold M with strictly convex boundary.

    Immutable; cached geometric quantities are computed lazily and are safe
    to share between worker threads once computed.
    """

    mode: str
    boundary: Any
    conformal_factor: ConformalFactor | None = None
    gamma: BoundaryConstraint = field(default_factory=BoundaryConstraint)
    tol_bdry_rel: float = DEFAULT_TOL_BDRY

    def __post_init__(self) -> None:
        """Check the mode/boundary combination."""
        if self.mode not in (MODE_PLANAR_2D, MODE_BODY_3D):
            raise DomainError(f"Unknown domain mode {self.mode!r}")
        if self.mode == MODE_PLANAR_2D and not isinstance(self.boundary, PlanarBoundary):
            raise DomainError("Planar domains need a planar boundary curve")
        if self.mode == MODE_BODY_3D:
            if not isinstance(self.boundary, EllipsoidBoundary):
                raise DomainError("3-D domains need an ellipsoid boundary")
            if self.conformal_factor is not None:
                raise DomainError("3-D domains carry the Euclidean metric")

    @property
    def dim(self) -> int:
        """Return the ambient dimension."""
        return 2 if self.mode == MODE_PLANAR_2D else 3

    @property
    def n(self) -> int:
        """Return the hypersurface dimension."""
        return self.dim - 1

    @property
    def phi(self) -> ConformalFactor | None:
        """Return the conformal factor, or None for the Euclidean metric."""
        if self.conformal_factor is None or self.conformal_factor.is_flat:
            return None
        return self.conformal_factor

    @property
    def is_flat(self) -> bool:
        """Return True when the metric is Euclidean."""
        return self.phi is None

    @cached_property
    def diameter(self) -> float:
        """Return the Euclidean diameter of M."""
        if self.mode == MODE_BODY_3D:
            return 2.0 * float(np.max(self.boundary.semi_axes))
        _, pts = self.boundary.samples(BOUNDARY_SAMPLES_2D)
        hull = pts[:: max(1, len(pts) // 128)]
        diff = hull[:, None, :] - hull[None, :, :]
        return float(np.max(np.linalg.norm(diff, axis=2)))

    @property
    def tol_bdry(self) -> float:
        """Return the absolute boundary tolerance."""
        return self.tol_bdry_rel * self.diameter

    def phi_value(self, points: np.ndarray) -> np.ndarray:
        """Return phi at points (zeros for the Euclidean metric)."""
        points = np.asarray(points, dtype=float)
        if self.phi is None:
            return np.zeros(points.shape[:-1])
        return self.phi.value(points)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Return Euclidean distance to the boundary, positive inside."""
        return self.boundary.signed_distance(points)

    def contains(self, points: np.ndarray, tol: float | None = None) -> np.ndarray:
        """Return a mask of points inside the closed domain."""
        tol = self.tol_bdry if tol is None else tol
        return self.signed_distance(points) >= -tol

    def closest_boundary_point(self, points: np.ndarray) -> np.ndarray:
        """Project points onto the boundary."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.mode == MODE_BODY_3D:
            return self.boundary.closest_point(points)
        return self.boundary.point(self.boundary.closest_parameter(points))

    def inward_normal(self, points: np.ndarray) -> np.ndarray:
        """Return unit Euclidean inward normals at the closest boundary points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.mode == MODE_BODY_3D:
            return self.boundary.inward_normal(self.boundary.closest_point(points))
        return self.boundary.inward_normal(self.boundary.closest_parameter(points))

    @cached_property
    def convexity_modulus(self) -> float:
        """Return xi, see :func:`convexity_modulus`."""
        return convexity_modulus(self)

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON domain description."""
        data: dict[str, Any] = {"mode": self.mode, "boundary": self.boundary.to_dict()}
        if self.conformal_factor is not None:
            data["phi_grid"] = self.conformal_factor.to_dict()
        if self.mode == MODE_BODY_3D:
            data["semi_axes"] = self.boundary.semi_axes.tolist()
        data["gamma"] = [c.to_dict() for c in self.gamma.components]
        return data

    def validate(self) -> None:
        """Check convexity, gamma placement and grid coverage."""
        convexity_modulus(self)
        if not self.gamma.is_empty:
            pts = self.gamma.samples(64)
            off = np.abs(self.signed_distance(pts))
            if np.max(off) > self.tol_bdry:
                raise PointNotOnBoundary(f"gamma is {np.max(off):.3e} away from the boundary")
        if self.conformal_factor is not None and self.mode == MODE_PLANAR_2D:
            xmin, xmax, ymin, ymax = self.boundary.bounding_box()
            gx0, gx1, gy0, gy1 = self.conformal_factor.bounds
            if gx0 > xmin or gx1 < xmax or gy0 > ymin or gy1 < ymax:
                raise DomainError("phi grid does not cover the domain")

    @cached_property
    def _distance_graph(self) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray, float]:
        """Build the 16-neighbour metric graph over the interior grid nodes."""
        return build_distance_graph(self, DEFAULT_DISTANCE_GRID)


# ---------------------------------------------------------------------------
# operations


def boundary_frame(domain: AmbientDomain, p: np.ndarray) -> BoundaryFrame:
    """Return the inward normal, tangent basis and principal curvatures at p."""
    p = np.asarray(p, dtype=float)
    off = abs(float(domain.signed_distance(p[None, :])[0]))
    if off > domain.tol_bdry:
        raise PointNotOnBoundary(f"Point {p.tolist()} is {off:.3e} away from the boundary")
    if domain.mode == MODE_BODY_3D:
        nu, basis, curvatures = domain.boundary.shape_operator(p[None, :])
        return BoundaryFrame(nu, basis, curvatures)
    t = domain.boundary.closest_parameter(p[None, :])
    nu_e = domain.boundary.inward_normal(t)[0]
    tan_e = domain.boundary.tangent(t)[0]
    kappa = float(domain.boundary.curvature(t)[0])
    if domain.phi is None:
        return BoundaryFrame(nu_e, tan_e[None, :], np.array([kappa]))
    scale = float(np.exp(-domain.phi.value(p)))
    d_nu = float(domain.phi.gradient(p) @ nu_e)
    # geodesic curvature of the boundary in g = exp(2 phi) * euclidean
    kappa_g = scale * (kappa - d_nu)
    return BoundaryFrame(scale * nu_e, scale * tan_e[None, :], np.array([kappa_g]))


def convexity_modulus(domain: AmbientDomain) -> float:
    """Return the minimal boundary principal curvature over a dense sample."""
    if domain.mode == MODE_BODY_3D:
        pts = domain.boundary.parametric_grid(BOUNDARY_SAMPLES_3D)
        values = [float(np.min(domain.boundary.shape_operator(p[None, :])[2])) for p in pts]
        xi = float(np.min(values))
    else:
        t, pts = domain.boundary.samples(BOUNDARY_SAMPLES_2D)
        kappa = domain.boundary.curvature(t)
        if domain.phi is not None:
            d_nu = np.sum(domain.phi.gradient(pts) * domain.boundary.inward_normal(t), axis=1)
            kappa = np.exp(-domain.phi.value(pts)) * (kappa - d_nu)
        xi = float(np.min(kappa))
    if xi <= 0.0:
        raise NotUniformlyConvex(f"Boundary curvature minimum {xi:.6g} is not positive")
    return xi


def _check_inside(domain: AmbientDomain, points: np.ndarray) -> None:
    inside = domain.contains(points)
    if not np.all(inside):
        bad = np.atleast_2d(points)[~inside][0]
        raise PointOutsideDomain(f"Point {bad.tolist()} lies outside the domain")


def build_distance_graph(
    domain: AmbientDomain, n: int
) -> tuple[sparse.csr_matrix, np.ndarray, np.ndarray, float]:
    """Return (graph, node points, node index grid, spacing) on an n x n grid."""
    xmin, xmax, ymin, ymax = domain.boundary.bounding_box()
    h = max(xmax - xmin, ymax - ymin) / (n - 1)
    xs = xmin + h * np.arange(n)
    ys = ymin + h * np.arange(n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inside = (domain.signed_distance(pts) >= -domain.tol_bdry).reshape(n, n)
    index = -np.ones((n, n), dtype=int)
    index[inside] = np.arange(int(inside.sum()))
    nodes = pts[inside.ravel()]
    rows, cols, weights = [], [], []
    for dx, dy in _STENCIL:
        src = index[max(0, -dy) : n - max(0, dy), max(0, -dx) : n - max(0, dx)]
        dst = index[max(0, dy) : n + min(0, dy), max(0, dx) : n + min(0, dx)]
        ok = (src >= 0) & (dst >= 0)
        a = src[ok]
        b = dst[ok]
        seg = np.stack([nodes[a], nodes[b]], axis=1)
        rows.append(a)
        cols.append(b)
        weights.append(polyline_segment_masses(seg, domain.phi)[:, 0])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    weights = np.concatenate(weights)
    graph = sparse.csr_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(len(nodes), len(nodes)),
    )
    _LOGGER.debug("Distance graph on a %dx%d grid: %d nodes, spacing %.3g", n, n, len(nodes), h)
    return graph, nodes, index, h


def _augment(domain: AmbientDomain, graph_data, points: np.ndarray) -> tuple[sparse.csr_matrix, int]:
    """Attach extra query points to their neighbouring grid nodes."""
    graph, nodes, _, h = graph_data
    base = graph.shape[0]
    rows, cols, weights = [], [], []
    for k, p in enumerate(points):
        near = np.nonzero(np.linalg.norm(nodes - p, axis=1) <= 2.01 * h)[0]
        if len(near) == 0:
            near = np.array([int(np.argmin(np.linalg.norm(nodes - p, axis=1)))])
        seg = np.stack([np.repeat(p[None, :], len(near), axis=0), nodes[near]], axis=1)
        w = polyline_segment_masses(seg, domain.phi)[:, 0]
        rows.extend([base + k] * len(near))
        cols.extend(near.tolist())
        weights.extend(np.maximum(w, 1e-300).tolist())
    size = base + len(points)
    extra = sparse.csr_matrix(
        (weights + weights, (rows + cols, cols + rows)), shape=(size, size)
    )
    coo = graph.tocoo()
    padded = sparse.csr_matrix((coo.data, (coo.row, coo.col)), shape=(size, size))
    return (padded + extra).tocsr(), base


def _relax_path(domain: AmbientDomain, path: np.ndarray, n: int = 129) -> float:
    """Shorten a graph path with fixed endpoints by L-BFGS on the polyline mass."""
    start = resample_polyline(path, n)
    x0, x1 = start[0], start[-1]
    phi = domain.phi

    def fun(flat):
        verts = np.vstack([x0, flat.reshape(-1, 2), x1])
        mass = float(np.sum(polyline_segment_masses(verts, phi)))
        grad = polyline_mass_gradient(verts, phi)[1:-1]
        return mass, grad.ravel()

    res = optimize.minimize(fun, start[1:-1].ravel(), jac=True, method="L-BFGS-B",
                            options={"maxiter": 2000, "gtol": 1e-12, "ftol": 1e-15})
    verts = np.vstack([x0, res.x.reshape(-1, 2), x1])
    if not np.all(domain.contains(verts, tol=1e-9 * domain.diameter)):
        return np.inf
    return float(res.fun)


def metric_distance(domain: AmbientDomain, x: np.ndarray, y: np.ndarray) -> float:
    """Return the metric distance between two points of M."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inside(domain, np.vstack([x, y]))
    if domain.mode == MODE_BODY_3D or domain.conformal_factor is None or domain.conformal_factor.is_constant:
        c = 0.0 if domain.conformal_factor is None else domain.conformal_factor.constant
        return float(np.exp(c) * np.linalg.norm(x - y))
    if np.array_equal(x, y):
        return 0.0
    # canonical order keeps the result symmetric bit for bit
    if tuple(y) < tuple(x):
        x, y = y, x
    graph_data = domain._distance_graph
    graph, base = _augment(domain, graph_data, np.vstack([x, y]))
    dist, pred = dijkstra(graph, directed=False, indices=base, return_predecessors=True)
    graph_length = float(dist[base + 1])
    if not np.isfinite(graph_length):
        raise PointOutsideDomain("Points are not connected inside the domain")
    nodes = np.vstack([graph_data[1], x, y])
    chain = [base + 1]
    while chain[-1] != base:
        chain.append(int(pred[chain[-1]]))
    path = nodes[chain[::-1]]
    relaxed = _relax_path(domain, path)
    return min(graph_length, relaxed)


def grid_distance(domain: AmbientDomain, x: np.ndarray, y: np.ndarray, n: int = DEFAULT_DISTANCE_GRID) -> float:
    """Return the shortest-path length between two points on an n x n metric grid graph."""
    points = np.vstack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
    _check_inside(domain, points)
    graph, base = _augment(domain, build_distance_graph(domain, n), points)
    dist = dijkstra(graph, directed=False, indices=base)
    return float(dist[base + 1])


def distance_matrix(domain: AmbientDomain, points: np.ndarray) -> np.ndarray:
    """Return pairwise graph distances between points (exact when flat)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _check_inside(domain, points)
    if domain.mode == MODE_BODY_3D or domain.conformal_factor is None or domain.conformal_factor.is_constant:
        c = 0.0 if domain.conformal_factor is None else domain.conformal_factor.constant
        diff = points[:, None, :] - points[None, :, :]
        return np.exp(c) * np.linalg.norm(diff, axis=2)
    graph, base = _augment(domain, domain._distance_graph, points)
    dist = dijkstra(graph, directed=False, indices=np.arange(base, base + len(points)))
    out = dist[:, base:]
    return 0.5 * (out + out.T)


def boundary_normal_chart(domain: AmbientDomain, y: np.ndarray):
    """Return a chart around y with identity metric at y.

    Boundary points of a planar domain get boundary-normal coordinates,
    other points a scaled linear chart.
    """
    y = np.asarray(y, dtype=float)
    scale = float(np.exp(domain.phi_value(y)))
    on_boundary = abs(float(domain.signed_distance(y[None, :])[0])) <= domain.tol_bdry
    if domain.mode == MODE_PLANAR_2D and on_boundary:
        t0 = float(domain.boundary.closest_parameter(y[None, :])[0])
        return BoundaryNormalChart(domain.boundary, t0, scale)
    return LinearChart(y, scale)


# ---------------------------------------------------------------------------
# factories


def unit_disk(gamma: list | None = None) -> AmbientDomain:
    """Return the flat unit disk."""
    return ellipse_domain(1.0, 1.0, gamma)


def ellipse_domain(a: float, b: float, gamma: list | None = None, phi: ConformalFactor | None = None) -> AmbientDomain:
    """Return an ellipse domain with semi-axes (a, b)."""
    comps = tuple(GammaPoint(p) for p in (gamma or []))
    return AmbientDomain(MODE_PLANAR_2D, EllipseBoundary(a, b), phi, BoundaryConstraint(comps))


def gaussian_bump(height: float = 1.0, width: float = 0.3, n: int = 129, extent: float = 1.05) -> ConformalFactor:
    """Return a Gaussian conformal bump centred at the origin."""
    return ConformalFactor.from_function(
        lambda x, y: height * np.exp(-(x**2 + y**2) / (2.0 * width**2)),
        (-extent, extent, -extent, extent),
        n,
    )


def bump_disk(height: float = 1.0, width: float = 0.3, n: int = 129) -> AmbientDomain:
    """Return the unit disk with a Gaussian bump metric and gamma = {(-1, 0), (1, 0)}."""
    return ellipse_domain(1.0, 1.0, [(-1.0, 0.0), (1.0, 0.0)], gaussian_bump(height, width, n))


def unit_ball(gamma_heights: list[float] | None = None) -> AmbientDomain:
    """Return the unit ball, optionally with gamma circles at the given heights."""
    comps = []
    for h in gamma_heights or []:
        comps.append(GammaCircle((0.0, 0.0, h), (0.0, 0.0, 1.0), float(np.sqrt(1.0 - h * h))))
    return AmbientDomain(MODE_BODY_3D, EllipsoidBoundary((1.0, 1.0, 1.0)), None, BoundaryConstraint(tuple(comps)))


def _boundary_from_dict(data: dict[str, Any]):
    kind = data.get("kind", "ellipse")
    if kind == "ellipse":
        a, b = data.get("semi_axes", [1.0, 1.0])
        return EllipseBoundary(a, b, data.get("center", (0.0, 0.0)), data.get("rotation", 0.0))
    if kind == "spline":
        return SplineBoundary(np.asarray(data["control_points"], dtype=float))
    if kind == "ellipsoid":
        return EllipsoidBoundary(data["semi_axes"], data.get("center", (0.0, 0.0, 0.0)))
    raise DomainError(f"Unknown boundary kind {kind!r}")


def domain_from_dict(data: dict[str, Any]) -> AmbientDomain:
    """Build a domain from its JSON description."""
    mode = data["mode"]
    boundary_data = dict(data.get("boundary") or {})
    if mode == MODE_BODY_3D:
        boundary_data.setdefault("kind", "ellipsoid")
        boundary_data.setdefault("semi_axes", data.get("semi_axes", [1.0, 1.0, 1.0]))
    boundary = _boundary_from_dict(boundary_data)
    phi = None
    if "phi_grid" in data and data["phi_grid"] is not None:
        phi = ConformalFactor.from_dict(data["phi_grid"])
    elif data.get("phi"):
        spec = data["phi"]
        phi = gaussian_bump(spec.get("height", 1.0), spec.get("width", 0.3), spec.get("n", 129))
    comps = []
    for item in data.get("gamma", []):
        if isinstance(item, dict):
            comps.append(GammaCircle(item["center"], item["axis"], item["radius"]))
        elif mode == MODE_BODY_3D:
            h = float(item)
            comps.append(GammaCircle((0.0, 0.0, h), (0.0, 0.0, 1.0), float(np.sqrt(1.0 - h * h))))
        else:
            comps.append(GammaPoint(item))
    domain = AmbientDomain(mode, boundary, phi, BoundaryConstraint(tuple(comps)))
    domain.validate()
    return domain


def load_domain(source: str | Path | dict[str, Any]) -> AmbientDomain:
    """Load a domain from a JSON file or an already parsed dict."""
    if isinstance(source, dict):
        return domain_from_dict(source)
    with open(source, encoding="utf-8") as handle:
        return domain_from_dict(json.load(handle))
