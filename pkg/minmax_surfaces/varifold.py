"""Discrete varifold diagnostics for stationary slices."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Any, Sequence

import numpy as np
from scipy import linalg, optimize, sparse
from scipy.sparse import linalg as sparse_linalg
from scipy.spatial import ConvexHull, QhullError

from .ambient import AmbientDomain
from .const import (
    DEFAULT_MONOTONICITY_TOL,
    DEFAULT_RESIDUAL_TOL,
    DEFAULT_SPEC_TOL,
    DEFAULT_TOL_ANGLE,
    MODE_BODY_3D,
)
from .exceptions import (
    AngleOutOfRange,
    EvenCount,
    NotStable,
    NotStationary,
    RadiiOutOfRange,
)
from .geometry import (
    boundary_loops,
    max_edge_length,
    mesh_abs_curvature,
    polyline_abs_curvature,
    polyline_normals,
    vertex_normals,
)
from .parallel import map_ordered
from .sweepout import Slice, slice_atom_masses, slice_mass
from .tighten import (
    VectorFieldClass,
    constraint_masks,
    mass_gradient,
    stationarity_residual,
    vertex_measures,
)

_LOGGER = logging.getLogger(__name__)

# unit ball volumes in dimension n
_OMEGA = {1: 2.0, 2: np.pi}
_DENSE_LIMIT = 3000
_FACE_SUBDIVISION = 8


# ---------------------------------------------------------------------------
# varifold


@dataclass
class DiscreteVarifold:
    """Weighted atoms: segments (2-D) or triangles (3-D) with their tangents.

    ``segments`` keeps the atom geometry (n_atoms, n + 1, dim) so that ball
    masses can be computed by clipping instead of by atom centres.
    """

    positions: np.ndarray
    tangents: np.ndarray
    weights: np.ndarray
    segments: np.ndarray
    n: int

    @property
    def total_mass(self) -> float:
        """Return the sum of atom weights."""
        return float(np.sum(self.weights))

    def ball_mass(self, x: np.ndarray, radius: float) -> float:
        """Return the weight inside the open Euclidean ball B(x, radius)."""
        x = np.asarray(x, dtype=float)
        if len(self.weights) == 0:
            return 0.0
        if self.n == 1:
            fraction = _segment_fraction(self.segments[:, 0], self.segments[:, 1], x, radius)
        else:
            fraction = _triangle_fraction(self.segments, x, radius)
        return float(np.sum(self.weights * fraction))


def _segment_fraction(a: np.ndarray, b: np.ndarray, x: np.ndarray, radius: float) -> np.ndarray:
    """Return the fraction of each segment [a, b] inside the ball."""
    d = b - a
    f = a - x
    qa = np.sum(d * d, axis=1)
    qb = 2.0 * np.sum(f * d, axis=1)
    qc = np.sum(f * f, axis=1) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    safe = np.maximum(qa, 1e-300)
    root = np.sqrt(np.maximum(disc, 0.0))
    lo = np.clip((-qb - root) / (2.0 * safe), 0.0, 1.0)
    hi = np.clip((-qb + root) / (2.0 * safe), 0.0, 1.0)
    return np.where((disc > 0.0) & (qa > 0.0), hi - lo, 0.0)


def _triangle_fraction(triangles: np.ndarray, x: np.ndarray, radius: float) -> np.ndarray:
    """Estimate the fraction of each triangle inside the ball on a barycentric sub-grid."""
    s = _FACE_SUBDIVISION
    ij = [(i, j) for i in range(s) for j in range(s - i)]
    bary = np.array([[(i + 1 / 3) / s, (j + 1 / 3) / s] for i, j in ij])
    bary_up = np.array([[(i + 2 / 3) / s, (j + 2 / 3) / s] for i, j in ij if i + j < s - 1])
    bary = np.vstack([bary, bary_up])
    a, b, c = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    pts = a[:, None, :] + bary[None, :, 0, None] * (b - a)[:, None, :] + bary[None, :, 1, None] * (c - a)[:, None, :]
    inside = np.linalg.norm(pts - x, axis=2) < radius
    return inside.mean(axis=1)


def to_varifold(domain: AmbientDomain, *slices: Slice) -> DiscreteVarifold:
    """Return the varifold carried by one or more slices."""
    dim = domain.dim
    n = domain.n
    positions, tangents, weights, segments = [], [], [], []
    for slice_ in slices:
        if slice_.is_trivial:
            continue
        atom_weights = slice_atom_masses(domain, slice_)
        vertices = slice_.vertices
        if slice_.is_mesh:
            tri = vertices[slice_.faces]
            e1 = tri[:, 1] - tri[:, 0]
            e2 = tri[:, 2] - tri[:, 0]
            u = e1 / np.maximum(np.linalg.norm(e1, axis=1, keepdims=True), 1e-300)
            w = e2 - np.sum(e2 * u, axis=1, keepdims=True) * u
            w /= np.maximum(np.linalg.norm(w, axis=1, keepdims=True), 1e-300)
            positions.append(tri.mean(axis=1))
            tangents.append(np.stack([u, w], axis=1))
            segments.append(tri)
        else:
            work = np.vstack([vertices, vertices[:1]]) if slice_.closed else vertices
            seg = np.stack([work[:-1], work[1:]], axis=1)
            d = seg[:, 1] - seg[:, 0]
            positions.append(seg.mean(axis=1))
            tangents.append((d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300))[:, None, :])
            segments.append(seg)
        weights.append(atom_weights)
    if not weights:
        empty = np.zeros((0, dim))
        return DiscreteVarifold(empty, np.zeros((0, n, dim)), np.zeros(0), np.zeros((0, n + 1, dim)), n)
    varifold = DiscreteVarifold(
        np.concatenate(positions), np.concatenate(tangents), np.concatenate(weights), np.concatenate(segments), n
    )
    expected = sum(slice_mass(domain, s) for s in slices)
    assert abs(varifold.total_mass - expected) <= 1e-12 * max(1.0, expected)
    return varifold


# ---------------------------------------------------------------------------
# monotonicity


def _interior_grid(domain: AmbientDomain, samples: int = 65) -> np.ndarray:
    xmin, xmax, ymin, ymax = domain.boundary.bounding_box()
    xx, yy = np.meshgrid(np.linspace(xmin, xmax, samples), np.linspace(ymin, ymax, samples))
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return pts[domain.contains(pts)]


def sup_grad_phi(domain: AmbientDomain) -> float:
    """Return sup |grad phi| over the domain (0 when flat)."""
    if domain.is_flat:
        return 0.0
    return float(np.max(np.linalg.norm(domain.phi.gradient(_interior_grid(domain)), axis=1)))


def monotonicity_lambda(domain: AmbientDomain) -> float:
    """Return n * (sup |grad phi| + sqrt(max |K|)) over the domain (0 when flat)."""
    if domain.is_flat:
        return 0.0
    curv = float(np.max(np.abs(domain.phi.gauss_curvature(_interior_grid(domain)))))
    return domain.n * (sup_grad_phi(domain) + np.sqrt(curv))


def monotonicity_constant(domain: AmbientDomain, r0: float | None = None) -> float:
    """Return C_M = e^(Lambda r0) / r0^n, so that |V|(B_r) <= C_M |V|(M) r^n for r < r0."""
    r0 = domain.diameter if r0 is None else float(r0)
    return float(np.exp(monotonicity_lambda(domain) * r0) / r0**domain.n)


@dataclass
class DensityReport:
    """Density ratios f(rho) at a point."""

    x: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray
    kind: str
    lam: float
    phi_table: np.ndarray
    c_m: float
    theta: float
    non_monotone: list[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        """Return True when no pair decreases beyond tolerance."""
        return not self.non_monotone

    def rows(self) -> list[dict[str, float]]:
        """Return CSV rows (rho, f)."""
        return [{"rho": float(r), "f": float(f)} for r, f in zip(self.radii, self.ratios)]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "x": self.x.tolist(),
            "radii": self.radii.tolist(),
            "ratios": self.ratios.tolist(),
            "kind": self.kind,
            "lambda": self.lam,
            "phi": self.phi_table.tolist(),
            "c_m": self.c_m,
            "theta": self.theta,
            "non_monotone": self.non_monotone,
        }


def monotonicity_profile(
    domain: AmbientDomain,
    varifold: DiscreteVarifold,
    x: np.ndarray,
    radii: Sequence[float],
    free_boundary: bool = False,
    tol: float = DEFAULT_MONOTONICITY_TOL,
) -> DensityReport:
    """Return e^(Lambda rho) |V|(B_rho(x)) / (omega_n rho^n) for increasing radii.

    At boundary points in free-boundary mode the mass of the ball around the
    reflected centre is added. Metric balls are approximated by Euclidean
    balls of radius rho * e^(-phi(x)).
    """
    x = np.asarray(x, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise RadiiOutOfRange("Need at least one radius")
    if np.any(radii <= 0.0) or np.any(np.diff(radii) <= 0.0):
        raise RadiiOutOfRange(f"Radii must be positive and increasing, got {radii.tolist()}")
    if radii[-1] > domain.diameter:
        raise RadiiOutOfRange(f"Largest radius {radii[-1]:.3g} exceeds diam(M) = {domain.diameter:.3g}")
    if not bool(domain.contains(x[None, :])[0]):
        raise RadiiOutOfRange(f"Centre {x.tolist()} lies outside M")

    n = varifold.n
    lam = monotonicity_lambda(domain)
    scale = float(np.exp(-domain.phi_value(x)))
    on_boundary = abs(float(domain.signed_distance(x[None, :])[0])) <= domain.tol_bdry
    reflected = None
    if free_boundary:
        kind = "reflected"
        reflected = x if on_boundary else 2.0 * domain.closest_boundary_point(x[None, :])[0] - x
    else:
        kind = "boundary" if on_boundary else "interior"

    ratios = np.empty(len(radii))
    for k, rho in enumerate(radii):
        mass = varifold.ball_mass(x, rho * scale)
        if reflected is not None:
            mass += varifold.ball_mass(reflected, rho * scale)
        ratios[k] = np.exp(lam * rho) * mass / (_OMEGA[n] * rho**n)

    # smallest nondecreasing phi with e^phi * f nondecreasing
    phi_table = np.zeros(len(radii))
    for k in range(1, len(radii)):
        step = np.log(max(ratios[k - 1], 1e-300) / max(ratios[k], 1e-300)) if ratios[k] > 0.0 else 0.0
        phi_table[k] = phi_table[k - 1] + max(step, 0.0)

    non_monotone = [
        k for k in range(len(radii) - 1) if ratios[k + 1] < ratios[k] - tol * max(ratios[k], 1.0)
    ]
    if len(radii) >= 2:
        m = min(3, len(radii))
        slope, intercept = np.polyfit(radii[:m], ratios[:m], 1)
        theta = float(max(intercept, 0.0))
        if np.ptp(ratios[:m]) <= 1e-12 * max(1.0, abs(ratios[0])):
            theta = float(ratios[0])
    else:
        theta = float(ratios[0])
    if non_monotone:
        _LOGGER.debug("Density ratios at %s decrease at %s", x.tolist(), non_monotone)
    return DensityReport(x, radii, ratios, kind, lam, phi_table, monotonicity_constant(domain), theta, non_monotone)


def density_profiles(
    domain: AmbientDomain, varifold: DiscreteVarifold, points: np.ndarray, radii: Sequence[float], free_boundary: bool = False
) -> list[DensityReport]:
    """Run monotonicity_profile for several probe points."""
    return map_ordered(lambda p: monotonicity_profile(domain, varifold, p, radii, free_boundary), list(np.atleast_2d(points)))


# ---------------------------------------------------------------------------
# wedge


@dataclass
class WedgeReport:
    """Measured slice angles at gamma against the certified opening angle."""

    points: np.ndarray
    measured: np.ndarray
    theta0: np.ndarray
    tol_angle: float = DEFAULT_TOL_ANGLE

    @property
    def passed(self) -> bool:
        """Return True when every measured angle is within its wedge."""
        return bool(np.all(self.measured <= self.theta0 + self.tol_angle))

    @property
    def margin(self) -> float:
        """Return min(theta0 - measured)."""
        if len(self.measured) == 0:
            return float("inf")
        return float(np.min(self.theta0 - self.measured))

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "points": self.points.tolist(),
            "measured": self.measured.tolist(),
            "theta0": self.theta0.tolist(),
            "margin": self.margin,
            "passed": self.passed,
        }


def wedge_angle(domain: AmbientDomain, point: np.ndarray) -> float:
    """Return the certified opening angle theta0 < pi/2 at a gamma point.

    Both branches come from the convexity modulus xi: on a gamma circle the
    osculating ball of radius 1/xi must not reach gamma, in the plane it must
    hold the chord to the nearest other gamma point. A conformal factor
    widens the planar angle towards pi/2.
    """
    point = np.asarray(point, dtype=float)
    if domain.mode == MODE_BODY_3D:
        xi = domain.convexity_modulus
        dist = [c.distance(point[None, :])[0] for c in domain.gamma.components]
        comp = domain.gamma.components[int(np.argmin(dist))]
        curvature = comp.curvature()
        if curvature <= 0.0:
            return 0.0

        def g(theta):
            return xi * np.tan(theta) * np.sin(theta) ** 2 - curvature

        return float(optimize.brentq(g, 0.0, np.pi / 2 - 1e-12))
    others = [
        c.point for c in domain.gamma.components if np.linalg.norm(c.point - point) > domain.tol_bdry
    ]
    if not others:
        return float(np.pi / 2 - DEFAULT_TOL_ANGLE)
    # M sits in the osculating disk of radius 1/xi tangent at the point, so a
    # chord of length r leaves at most arccos(xi r / 2) away from nu
    reach = min(float(np.linalg.norm(q - point)) for q in others)
    base = float(np.arccos(np.clip(domain.convexity_modulus * reach / 2.0, 0.0, 1.0)))
    if domain.is_flat:
        return base
    grad = sup_grad_phi(domain)
    return float(base + (np.pi / 2 - base) * (1.0 - np.exp(-grad * domain.diameter)))


def _boundary_directions(slice_: Slice) -> tuple[np.ndarray, np.ndarray]:
    """Return boundary vertex indices and unit directions pointing into the slice."""
    vertices = slice_.vertices
    if not slice_.is_mesh:
        if slice_.is_trivial or slice_.closed:
            return np.zeros(0, dtype=int), np.zeros((0, vertices.shape[1]))
        first = vertices[1] - vertices[0]
        last = vertices[-2] - vertices[-1]
        dirs = np.stack([first, last])
        return np.array([0, len(vertices) - 1]), dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    faces = slice_.faces
    indices, dirs = [], []
    for loop in boundary_loops(faces):
        loop_set = set(loop.tolist())
        for pos, i in enumerate(loop):
            tangent = vertices[loop[(pos + 1) % len(loop)]] - vertices[loop[pos - 1]]
            tangent /= max(np.linalg.norm(tangent), 1e-300)
            neighbours = np.unique(faces[np.any(faces == i, axis=1)])
            inner = [j for j in neighbours if j not in loop_set]
            if not inner:
                inner = [j for j in neighbours if j != i]
            d = np.mean(vertices[inner] - vertices[i], axis=0)
            d -= (d @ tangent) * tangent
            indices.append(int(i))
            dirs.append(d / max(np.linalg.norm(d), 1e-300))
    return np.array(indices, dtype=int), np.array(dirs)


def wedge_check(domain: AmbientDomain, slice_: Slice, theta_target: float | None = None) -> WedgeReport:
    """Compare slice angles at gamma with the certified wedge opening angle."""
    idx, dirs = _boundary_directions(slice_)
    if len(idx) and not domain.gamma.is_empty:
        keep = domain.gamma.distance(slice_.vertices[idx]) <= domain.tol_bdry
        idx, dirs = idx[keep], dirs[keep]
    else:
        idx, dirs = idx[:0], dirs[:0]
    points = slice_.vertices[idx]
    measured = np.zeros(len(idx))
    theta0 = np.zeros(len(idx))
    cache: dict[Any, float] = {}
    for k, (p, d) in enumerate(zip(points, dirs)):
        nu = domain.inward_normal(p[None, :])[0]
        along = float(d @ nu)
        across = float(np.linalg.norm(d - along * nu))
        measured[k] = float(np.arctan2(across, along))
        if domain.mode == MODE_BODY_3D:
            key = int(np.argmin([c.distance(p[None, :])[0] for c in domain.gamma.components]))
        else:
            key = tuple(np.round(p, 9))
        if theta_target is not None:
            theta0[k] = theta_target
        else:
            if key not in cache:
                cache[key] = wedge_angle(domain, p)
            theta0[k] = cache[key]
    report = WedgeReport(points, measured, theta0)
    _LOGGER.debug("Wedge check: %d gamma points, margin %.3g", len(idx), report.margin)
    return report


# ---------------------------------------------------------------------------
# second variation


@dataclass
class NormalChart:
    """Reduced coordinates: one displacement direction per free vertex."""

    vertex: np.ndarray
    direction: np.ndarray
    curvature: np.ndarray
    measure: np.ndarray

    @property
    def size(self) -> int:
        """Return the number of reduced coordinates."""
        return len(self.vertex)

    def displacement(self, coeffs: np.ndarray, n_vertices: int) -> np.ndarray:
        """Return the vertex displacement of a reduced vector (linear part)."""
        out = np.zeros((n_vertices, self.direction.shape[1]))
        out[self.vertex] += np.asarray(coeffs)[:, None] * self.direction
        return out


def normal_chart(
    domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass, region_mask: np.ndarray | None = None
) -> NormalChart:
    """Build the normal-graph chart of admissible displacements.

    Interior vertices move along the slice normal. In the tangent class,
    slice boundary vertices on the wall move along the wall, orthogonally to
    the slice boundary, and carry the wall's normal curvature in that
    direction.
    """
    cls = VectorFieldClass(cls)
    vertices = slice_.vertices
    masks = constraint_masks(domain, slice_, cls)
    normals = vertex_normals(vertices, slice_.faces) if slice_.is_mesh else polyline_normals(vertices)
    measures = vertex_measures(domain, slice_)
    fixed = masks.slice_boundary | masks.on_gamma
    if cls == VectorFieldClass.INWARD_VANISH_ON_GAMMA:
        fixed |= masks.on_wall
    if region_mask is not None:
        fixed |= ~np.asarray(region_mask, dtype=bool)
    interior = np.nonzero(~fixed)[0]
    vertex = list(interior)
    direction = list(normals[interior])
    curvature = [0.0] * len(interior)
    measure = list(measures[interior])
    if cls == VectorFieldClass.TANGENT_TO_BOUNDARY:
        for i in slice_.boundary_indices():
            outside = region_mask is not None and not region_mask[i]
            if not masks.on_wall[i] or masks.on_gamma[i] or outside:
                continue
            p = vertices[i]
            nu = masks.normals[i]
            if domain.mode == MODE_BODY_3D:
                e = normals[i] - (normals[i] @ nu) * nu
                e /= max(np.linalg.norm(e), 1e-300)
                _, basis, curvatures = domain.boundary.shape_operator(p[None, :])
                kappa = float(np.sum(curvatures * (basis @ e) ** 2))
            else:
                t = domain.boundary.closest_parameter(p[None, :])
                e = domain.boundary.tangent(t)[0]
                kappa = float(domain.boundary.curvature(t)[0])
            vertex.append(int(i))
            direction.append(e)
            curvature.append(kappa)
            measure.append(float(measures[i]))
    dim = vertices.shape[1]
    return NormalChart(
        np.asarray(vertex, dtype=int),
        np.asarray(direction, dtype=float).reshape(-1, dim),
        np.asarray(curvature, dtype=float),
        np.maximum(np.asarray(measure, dtype=float), 1e-300),
    )


def reduced_hessian(domain: AmbientDomain, slice_: Slice, chart: NormalChart, h: float | None = None) -> sparse.csr_matrix:
    """Return the mass Hessian in chart coordinates by central differences of the gradient."""
    vertices = np.array(slice_.vertices)
    h = 1e-5 * max(max_edge_length(vertices, slice_.faces), 1e-12) if h is None else h
    lookup = -np.ones(len(vertices), dtype=int)
    # a vertex carries at most one chart coordinate
    lookup[chart.vertex] = np.arange(chart.size)
    grad0 = mass_gradient(domain, slice_)
    rows, cols, vals = [], [], []
    for j in range(chart.size):
        i = chart.vertex[j]
        step = np.zeros_like(vertices)
        step[i] = h * chart.direction[j]
        plus = mass_gradient(domain, slice_.with_vertices(vertices + step))
        minus = mass_gradient(domain, slice_.with_vertices(vertices - step))
        column = (plus - minus) / (2.0 * h)
        touched = np.nonzero(np.any(column != 0.0, axis=1))[0]
        for v in touched:
            k = lookup[v]
            if k < 0:
                continue
            rows.append(k)
            cols.append(j)
            vals.append(float(column[v] @ chart.direction[k]))
    hess = sparse.csr_matrix((vals, (rows, cols)), shape=(chart.size, chart.size))
    hess = 0.5 * (hess + hess.T)
    if np.any(chart.curvature != 0.0):
        nu_part = np.zeros(chart.size)
        wall = np.nonzero(chart.curvature)[0]
        nus = domain.inward_normal(vertices[chart.vertex[wall]])
        nu_part[wall] = chart.curvature[wall] * np.sum(grad0[chart.vertex[wall]] * nus, axis=1)
        hess = hess + sparse.diags(nu_part)
    return hess.tocsr()


@dataclass
class SpectrumReport:
    """Lowest eigenpairs of the second variation in a normal chart."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    chart: NormalChart
    spec_tol: float = DEFAULT_SPEC_TOL

    @property
    def index(self) -> int:
        """Return the number of eigenvalues below -spec_tol."""
        return int(np.sum(self.eigenvalues < -self.spec_tol))

    @property
    def stability_margin(self) -> float:
        """Return the lowest eigenvalue."""
        return float(self.eigenvalues[0]) if len(self.eigenvalues) else float("inf")

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {"eigenvalues": self.eigenvalues.tolist(), "index": self.index, "dofs": self.chart.size}


def second_variation_spectrum(
    domain: AmbientDomain,
    slice_: Slice,
    cls: VectorFieldClass,
    count: int = 6,
    residual_tol: float | None = None,
    spec_tol: float = DEFAULT_SPEC_TOL,
    region_mask: np.ndarray | None = None,
) -> SpectrumReport:
    """Return the lowest eigenvalues of the mass Hessian against lumped vertex measures.

    With ``region_mask`` only the masked vertices move and stationarity is
    measured there.
    """
    cls = VectorFieldClass(cls)
    mass = slice_mass(domain, slice_)
    if residual_tol is None:
        residual_tol = DEFAULT_RESIDUAL_TOL * max(mass, 1e-12) / domain.diameter
    residual = stationarity_residual(domain, slice_, cls, region_mask)
    if residual > residual_tol:
        raise NotStationary(f"Residual {residual:.3e} exceeds {residual_tol:.3e}")
    chart = normal_chart(domain, slice_, cls, region_mask)
    if chart.size == 0:
        return SpectrumReport(np.zeros(0), np.zeros((0, 0)), chart, spec_tol)
    hess = reduced_hessian(domain, slice_, chart)
    count = min(count, chart.size)
    if chart.size <= _DENSE_LIMIT:
        values, vectors = linalg.eigh(hess.toarray(), np.diag(chart.measure), subset_by_index=[0, count - 1])
    else:
        scale = sparse.diags(1.0 / np.sqrt(chart.measure))
        values, vectors = sparse_linalg.eigsh(scale @ hess @ scale, k=count, which="SA")
        order = np.argsort(values)
        values, vectors = values[order], scale @ vectors[:, order]
    _LOGGER.debug("Second variation: %d dofs, lowest eigenvalues %s", chart.size, np.round(values, 6).tolist())
    return SpectrumReport(np.asarray(values), np.asarray(vectors), chart, spec_tol)


def rayleigh_check(domain: AmbientDomain, slice_: Slice, report: SpectrumReport, k: int = 0, h: float = 1e-4) -> float:
    """Return the relative gap between an eigenvalue and the finite-difference Rayleigh quotient."""
    vec = report.eigenvectors[:, k]
    vec = vec / np.sqrt(np.sum(report.chart.measure * vec**2))
    disp = report.chart.displacement(vec, len(slice_.vertices))
    base = slice_mass(domain, slice_)
    plus = slice_mass(domain, slice_.with_vertices(slice_.vertices + h * disp))
    minus = slice_mass(domain, slice_.with_vertices(slice_.vertices - h * disp))
    quotient = (plus + minus - 2.0 * base) / h**2
    value = float(report.eigenvalues[k])
    return abs(quotient - value) / max(abs(value), 1e-12)


# ---------------------------------------------------------------------------
# boundary checks


@dataclass
class BoundaryReport:
    """Maximum principle, curvature ratio, orthogonality and gamma mass."""

    max_principle_ok: bool
    curvature_ratio: float
    orthogonality_defect: float
    gamma_mass: float
    total_mass: float

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "max_principle_ok": self.max_principle_ok,
            "curvature_ratio": self.curvature_ratio,
            "orthogonality_defect": self.orthogonality_defect,
            "gamma_mass": self.gamma_mass,
            "total_mass": self.total_mass,
        }


def boundary_report(domain: AmbientDomain, slice_: Slice, collar: float = 0.1) -> BoundaryReport:
    """Return boundary diagnostics of a slice."""
    vertices = slice_.vertices
    tol = domain.tol_bdry
    total = slice_mass(domain, slice_)
    if slice_.is_trivial:
        return BoundaryReport(True, 0.0, 0.0, 0.0, total)
    depth = domain.signed_distance(vertices)
    on_gamma = np.zeros(len(vertices), dtype=bool)
    if not domain.gamma.is_empty:
        on_gamma = domain.gamma.distance(vertices) <= tol
        max_ok = not bool(np.any((depth <= tol) & ~on_gamma))
        to_edge = domain.gamma.distance(vertices)
    else:
        max_ok = True
        to_edge = np.abs(depth)

    if slice_.is_mesh:
        curvature = mesh_abs_curvature(vertices, slice_.faces)
    else:
        curvature = polyline_abs_curvature(vertices)
    near = depth < collar * domain.diameter
    near[slice_.boundary_indices()] = False
    ratio = float(np.max(curvature[near] * to_edge[near])) if np.any(near) else 0.0

    defect = 0.0
    idx, dirs = _boundary_directions(slice_)
    for i, d in zip(idx, dirs):
        if abs(depth[i]) > tol or on_gamma[i]:
            continue
        nu = domain.inward_normal(vertices[i][None, :])[0]
        defect = max(defect, float(np.arccos(np.clip(d @ nu, -1.0, 1.0))))

    gamma_mass = 0.0
    if not domain.gamma.is_empty:
        varifold = to_varifold(domain, slice_)
        close = domain.gamma.distance(varifold.positions) <= tol
        gamma_mass = float(np.sum(varifold.weights[close]))
    return BoundaryReport(max_ok, ratio, defect, gamma_mass, total)


def convex_hull_check(domain: AmbientDomain, slice_: Slice) -> tuple[bool, float]:
    """Check that the slice lies in the Euclidean convex hull of gamma.

    Returns (inside, margin) with margin > 0 meaning strictly inside.
    """
    if domain.gamma.is_empty:
        return True, float("inf")
    hull_points = domain.gamma.samples(256)
    vertices = slice_.vertices
    tol = domain.tol_bdry
    try:
        hull = ConvexHull(hull_points)
        signed = vertices @ hull.equations[:, :-1].T + hull.equations[:, -1]
        margin = float(-np.max(signed))
        return margin >= -tol, margin
    except (QhullError, ValueError):
        # degenerate hull: distance to the hull by non-negative least squares
        weight = 1e3 * max(1.0, float(np.max(np.abs(hull_points))))
        system = np.vstack([hull_points.T, weight * np.ones(len(hull_points))])
        worst = 0.0
        for v in vertices:
            coeffs, _ = optimize.nnls(system, np.concatenate([v, [weight]]))
            worst = max(worst, float(np.linalg.norm(hull_points.T @ coeffs - v)))
        return worst <= tol, -worst


# ---------------------------------------------------------------------------
# vector sums and local-min gaps


def vector_sum_bound(vectors: np.ndarray) -> float:
    """Return |sum v_i| for an odd number of unit vectors with angles in (-pi/2, pi/2)."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if len(vectors) % 2 == 0:
        raise EvenCount(f"Need an odd number of vectors, got {len(vectors)}")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise AngleOutOfRange("Vectors must have unit length")
    angles = np.arctan2(vectors[:, 1], vectors[:, 0])
    if np.any(np.abs(angles) >= np.pi / 2):
        raise AngleOutOfRange(f"Angles must lie in (-pi/2, pi/2), got {angles.tolist()}")
    total = float(np.linalg.norm(vectors.sum(axis=0)))
    return total


def unit_vectors(angles: Sequence[float]) -> np.ndarray:
    """Return unit vectors at the given angles."""
    angles = np.asarray(angles, dtype=float)
    return np.column_stack([np.cos(angles), np.sin(angles)])


@dataclass
class GapTable:
    """Sampled mass gaps around a stable slice."""

    eps: list[float]
    min_gap: list[float]
    estimate: list[float]
    samples: int
    margin: float

    @property
    def ratios(self) -> list[float]:
        """Return min_gap / estimate per eps (nan for eps = 0)."""
        return [g / e if e > 0.0 else float("nan") for g, e in zip(self.min_gap, self.estimate)]

    @property
    def passed(self) -> bool:
        """Return True when every sampled gap is non-negative."""
        return all(g >= 0.0 for g in self.min_gap)

    def rows(self) -> list[dict[str, float]]:
        """Return CSV rows."""
        return [
            {"eps": e, "min_gap": g, "estimate": q, "ratio": r}
            for e, g, q, r in zip(self.eps, self.min_gap, self.estimate, self.ratios)
        ]


def local_min_gap(
    domain: AmbientDomain,
    stable: Slice,
    eps_list: Sequence[float],
    samples: int = 200,
    seed: int = 0,
    spectrum: SpectrumReport | None = None,
) -> GapTable:
    """Sample perturbations with fixed boundary at swept area eps and report the least mass gap.

    The quadratic estimate is margin * eps^2 / (2 mass), from the lowest
    eigenvalue and Cauchy-Schwarz between swept area and L2 norm.
    """
    cls = VectorFieldClass.VANISH_ON_BOUNDARY
    spectrum = spectrum or second_variation_spectrum(domain, stable, cls, count=4)
    margin = spectrum.stability_margin
    if not margin > spectrum.spec_tol:
        raise NotStable(f"Stability margin {margin:.3e} is not positive")
    chart = spectrum.chart
    modes = spectrum.eigenvectors
    lead = modes[:, 0] * np.sign(np.sum(modes[:, 0]) or 1.0)
    base = slice_mass(domain, stable)
    rng = np.random.default_rng(seed)
    eps_out, gaps, estimates = [], [], []
    for eps in eps_list:
        eps = float(eps)
        eps_out.append(eps)
        estimates.append(margin * eps**2 / (2.0 * base))
        if eps == 0.0:
            gaps.append(0.0)
            continue
        best = np.inf
        for _ in range(samples):
            coeffs = lead.copy()
            for k in range(1, modes.shape[1]):
                coeffs = coeffs + 0.3 * rng.normal() / (k + 1) * modes[:, k]
            swept = float(np.sum(chart.measure * np.abs(coeffs)))
            coeffs *= eps / max(swept, 1e-300)
            moved = stable.with_vertices(stable.vertices + chart.displacement(coeffs, len(stable.vertices)))
            best = min(best, slice_mass(domain, moved) - base)
        gaps.append(float(best))
        _LOGGER.debug("Gap at eps=%.3g over %d samples: %.3e", eps, samples, best)
    return GapTable(eps_out, gaps, estimates, samples, margin)
