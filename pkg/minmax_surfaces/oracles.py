"""Independent reference computations used to check solver output."""

from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .ambient import AmbientDomain, grid_distance
from .const import DEFAULT_DISTANCE_GRID
from .geometry import polyline_mass_gradient, polyline_segment_masses, resample_polyline

_LOGGER = logging.getLogger(__name__)


def simpson_line_mass(domain: AmbientDomain, vertices: np.ndarray, samples: int = 33) -> float:
    """Return the integral of e^phi along a polyline by Simpson's rule on every segment."""
    vertices = np.asarray(vertices, dtype=float)
    if samples % 2 == 0:
        samples += 1
    s = np.linspace(0.0, 1.0, samples)
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        pts = a + s[:, None] * (b - a)
        weight = np.exp(domain.phi_value(pts))
        total += float(integrate.simpson(weight, x=s)) * float(np.linalg.norm(b - a))
    return total


def refined_distance(domain: AmbientDomain, x: np.ndarray, y: np.ndarray, factor: int = 4) -> float:
    """Return the graph distance on a grid ``factor`` times finer than the solver's."""
    return grid_distance(domain, x, y, factor * (DEFAULT_DISTANCE_GRID - 1) + 1)


# ---------------------------------------------------------------------------
# catenoids


@dataclass
class CatenoidBranch:
    """A catenoid r(z) = a cosh(z / a) spanning two coaxial circles."""

    a: float
    half_height: float
    area: float
    index: int

    @property
    def neck(self) -> float:
        """Return the neck parameter h / a."""
        return self.half_height / self.a


def catenoid_area(a: float, half_height: float) -> float:
    """Return the area of the catenoid band |z| <= h."""
    return float(np.pi * a * (2.0 * half_height + a * np.sinh(2.0 * half_height / a)))


def two_disk_area(radius: float) -> float:
    """Return the area of the two flat disks spanning the circles."""
    return float(2.0 * np.pi * radius**2)


def jacobi_zero_count(potential: Callable[[np.ndarray], np.ndarray], start: float, stop: float) -> int:
    """Count zeros in (start, stop) of f'' + q f = 0 with f(start) = 0, f'(start) = 1."""

    def rhs(s, state):
        return [state[1], -potential(np.asarray(s)) * state[0]]

    sol = integrate.solve_ivp(rhs, (start, stop), [0.0, 1.0], max_step=(stop - start) / 2000, rtol=1e-10, atol=1e-12)
    values = sol.y[0][1:-1]
    return int(np.sum(np.sign(values[1:]) != np.sign(values[:-1])))


def catenoid_index(a: float, half_height: float) -> int:
    """Return the Morse index of the catenoid band with fixed boundary circles.

    Only rotationally symmetric Jacobi fields can be negative directions; in
    the conformal coordinate s = z / a they solve f'' + 2 f / cosh(s)^2 = 0.
    """
    neck = half_height / a
    return jacobi_zero_count(lambda s: 2.0 / np.cosh(s) ** 2, -neck, neck)


def catenoid_branches(radius: float, half_height: float) -> list[CatenoidBranch]:
    """Return the catenoids a cosh(h / a) = R, unstable branch first (may be empty)."""

    def f(a):
        return a * np.cosh(half_height / a) - radius

    lo = half_height / 50.0
    res = optimize.minimize_scalar(f, bounds=(lo, 10.0 * max(radius, half_height)), method="bounded", options={"xatol": 1e-14})
    a_star = float(res.x)
    if f(a_star) > 0.0:
        return []
    roots = [optimize.brentq(f, lo, a_star, xtol=1e-15), optimize.brentq(f, a_star, radius, xtol=1e-15)]
    return [CatenoidBranch(a, half_height, catenoid_area(a, half_height), catenoid_index(a, half_height)) for a in roots]


def catenoid_family_saddle(radius: float, half_height: float, samples: int = 4001) -> float:
    """Return the largest area along the one-parameter family of catenoid profiles.

    The family r(z) = a cosh(z / a) * R / (a cosh(h / a)) rescaled to keep the
    boundary circles is swept from the stable catenoid towards two disks;
    its maximum is the min-max value of the family.
    """
    branches = catenoid_branches(radius, half_height)
    if not branches:
        return two_disk_area(radius)
    z = np.linspace(-half_height, half_height, 801)
    best = 0.0
    for a in np.geomspace(branches[0].a * 0.2, branches[-1].a, samples):
        r = a * np.cosh(z / a) * radius / (a * np.cosh(half_height / a))
        dr = np.gradient(r, z)
        area = float(2.0 * np.pi * integrate.simpson(r * np.sqrt(1.0 + dr**2), x=z))
        best = max(best, area)
    return best


# ---------------------------------------------------------------------------
# conformal geodesics


def geodesic_conjugate_points(domain: AmbientDomain, vertices: np.ndarray) -> int:
    """Count conjugate points along a geodesic polyline: zeros of J'' + K J = 0 in metric arclength."""
    vertices = np.asarray(vertices, dtype=float)
    seg = polyline_segment_masses(vertices, domain.phi)
    sigma = np.concatenate([[0.0], np.cumsum(seg)])
    if domain.phi is None:
        curvature = np.zeros(len(vertices))
    else:
        curvature = domain.phi.gauss_curvature(vertices)
    return jacobi_zero_count(lambda s: np.interp(s, sigma, curvature), 0.0, float(sigma[-1]))


@dataclass
class StringResult:
    """Converged string of curves between two minima."""

    images: list[np.ndarray]
    masses: np.ndarray
    saddle: int
    iterations: int

    @property
    def saddle_mass(self) -> float:
        """Return the mass of the climbing image."""
        return float(self.masses[self.saddle])


def string_method(
    domain: AmbientDomain,
    first: np.ndarray,
    second: np.ndarray,
    images: int = 17,
    vertices: int = 65,
    iterations: int = 3000,
    step: float = 0.2,
    tol: float = 1e-9,
) -> StringResult:
    """Find the mountain-pass curve between two curves with common fixed endpoints.

    Images relax along the mass gradient minus its component along the
    string; the highest image climbs along the string.
    """
    a = resample_polyline(np.asarray(first, dtype=float), vertices)
    b = resample_polyline(np.asarray(second, dtype=float), vertices)
    phi = domain.phi
    path = [(1.0 - w) * a + w * b for w in np.linspace(0.0, 1.0, images)]

    def mass(v):
        return float(np.sum(polyline_segment_masses(v, phi)))

    def reparametrise(curves):
        flat = np.array([c.ravel() for c in curves])
        arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(flat, axis=0), axis=1))])
        target = np.linspace(0.0, arc[-1], len(curves))
        out = np.column_stack([np.interp(target, arc, flat[:, k]) for k in range(flat.shape[1])])
        return [resample_polyline(row.reshape(-1, 2), vertices) for row in out]

    masses = np.array([mass(v) for v in path])
    top = int(np.argmax(masses))
    it = 0
    for it in range(1, iterations + 1):
        previous = masses.copy()
        new = [path[0]]
        for k in range(1, images - 1):
            v = path[k]
            tangent = (path[k + 1] - path[k - 1]).ravel()
            tangent /= max(np.linalg.norm(tangent), 1e-300)
            grad = polyline_mass_gradient(v, phi)
            grad[0] = grad[-1] = 0.0
            lengths = np.linalg.norm(np.diff(v, axis=0), axis=1)
            scale = step * float(np.min(lengths)) / np.exp(domain.phi_value(v))[:, None]
            flat = grad.ravel()
            along = float(flat @ tangent)
            if k == top:
                force = -(flat - 2.0 * along * tangent)
            else:
                force = -(flat - along * tangent)
            new.append(v + scale * force.reshape(v.shape))
        new.append(path[-1])
        if it % 10 == 0:
            climber = new[top]
            new = reparametrise(new)
            new[top] = resample_polyline(climber, vertices)
        path = new
        masses = np.array([mass(v) for v in path])
        top = int(np.argmax(masses))
        if np.max(np.abs(masses - previous)) < tol * max(masses.max(), 1e-300):
            break
    _LOGGER.debug("String method: %d iterations, saddle mass %.9g", it, masses[top])
    return StringResult(path, masses, top, it)
