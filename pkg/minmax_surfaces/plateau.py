"""Local Plateau minimisation, cone homotopies and replacements."""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from typing import Any

import numpy as np
from scipy import optimize

from .ambient import AmbientDomain, boundary_normal_chart
from .comb import AbstractOpenSet, Annulus, Ball
from .const import DEFAULT_RESIDUAL_TOL, DEFAULT_SEED, DEFAULT_SPEC_TOL, DEFAULT_TOL_REPLACE, MODE_BODY_3D
from .exceptions import BarrierBlocked, EstimateViolated, NotStationary, NotTransversal, PlateauError
from .geometry import max_edge_length, polyline_normals, vertex_normals
from .sweepout import BoundaryCondition, Slice, slice_mass
from .tighten import VectorFieldClass, constraint_masks, mass_gradient, solve_stationary, stationarity_residual
from .varifold import monotonicity_constant, second_variation_spectrum

_LOGGER = logging.getLogger(__name__)

MODE_CONSTRAINED = "constrained"
MODE_FREE = "free"

_MAX_ESCAPES = 4
_JITTER_STEPS = 16


@dataclass
class PlateauProblem:
    """Minimise mass inside a region below mass(slice) + eps / 2^(m + 2)."""

    slice: Slice
    region: AbstractOpenSet
    eps: float
    m: int = 1
    mode: str = MODE_CONSTRAINED

    def __post_init__(self) -> None:
        """Check the cap and the mode."""
        if not self.eps > 0.0:
            raise PlateauError(f"eps must be positive, got {self.eps}")
        if self.mode not in (MODE_CONSTRAINED, MODE_FREE):
            raise PlateauError(f"Unknown Plateau mode {self.mode!r}")

    @property
    def energy_cap(self) -> float:
        """Return eps / 2^(m + 2)."""
        return self.eps / 2 ** (self.m + 2)

    @property
    def vector_class(self) -> VectorFieldClass:
        """Return the variation class of the mode."""
        if self.mode == MODE_FREE:
            return VectorFieldClass.TANGENT_TO_BOUNDARY
        return VectorFieldClass.INWARD_VANISH_ON_GAMMA


@dataclass
class PlateauResult:
    """Outcome of local_minimize."""

    slice: Slice
    masses: list[float]
    residual: float
    converged: bool
    escapes: int
    movable: np.ndarray
    cone: ConeReport | None = None


def region_mask(problem: PlateauProblem) -> np.ndarray:
    """Return the vertices strictly inside the region."""
    return problem.region.contains(problem.slice.vertices)


def _movable(domain: AmbientDomain, problem: PlateauProblem) -> tuple[np.ndarray, np.ndarray]:
    """Return masks of free interior vertices and of wall vertices that slide."""
    slice_ = problem.slice
    inside = region_mask(problem)
    masks = constraint_masks(domain, slice_, problem.vector_class)
    fixed = masks.slice_boundary | masks.on_gamma | masks.on_wall
    interior = inside & ~fixed
    sliding = np.zeros_like(inside)
    if problem.mode == MODE_FREE and domain.mode != MODE_BODY_3D:
        sliding = inside & masks.slice_boundary & masks.on_wall & ~masks.on_gamma
    return interior, sliding


def _offset_normals(slice_: Slice) -> np.ndarray:
    """Return the unit normals along which vertices of the slice are offset."""
    vertices = slice_.vertices
    if slice_.is_mesh:
        return vertex_normals(vertices, slice_.faces)
    if slice_.closed:
        tangent = np.roll(vertices, -1, axis=0) - np.roll(vertices, 1, axis=0)
        tangent /= np.maximum(np.linalg.norm(tangent, axis=1, keepdims=True), 1e-300)
        return np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    return polyline_normals(vertices)


def _descend(
    domain: AmbientDomain, start: Slice, interior: np.ndarray, sliding: np.ndarray, maxiter: int
) -> tuple[Slice, list[float], bool]:
    """L-BFGS on normal offsets of the interior vertices and the wall parameters of sliding vertices.

    Offsets along the normals of ``start`` keep interior vertices from
    sliding along the slice and bunching up.
    """
    base = np.array(start.vertices)
    n_in = int(interior.sum())
    normals = _offset_normals(start)[interior] if n_in else np.zeros((0, base.shape[1]))
    boundary = domain.boundary
    slide_idx = np.nonzero(sliding)[0]
    t0 = boundary.closest_parameter(base[slide_idx]) if len(slide_idx) else np.zeros(0)

    def unpack(x):
        vertices = base.copy()
        vertices[interior] = base[interior] + x[:n_in, None] * normals
        if len(slide_idx):
            vertices[slide_idx] = boundary.point(x[n_in:])
        return vertices

    def fun(x):
        s = start.with_vertices(unpack(x))
        grad = mass_gradient(domain, s)
        parts = [np.sum(grad[interior] * normals, axis=1)]
        if len(slide_idx):
            parts.append(np.sum(grad[slide_idx] * boundary.derivative(x[n_in:]), axis=1))
        return slice_mass(domain, s), np.concatenate(parts)

    masses: list[float] = [slice_mass(domain, start)]

    def record(x):
        masses.append(fun(x)[0])

    x0 = np.concatenate([np.zeros(n_in), t0])
    if len(x0) == 0:
        return start, masses, True
    res = optimize.minimize(
        fun, x0, jac=True, method="L-BFGS-B", callback=record,
        options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15},
    )
    result = start.with_vertices(unpack(res.x))
    masses.append(slice_mass(domain, result))
    return result, masses, bool(res.status == 0)


def _settle(
    domain: AmbientDomain, problem: PlateauProblem, current: Slice, interior: np.ndarray, sliding: np.ndarray
) -> Slice | None:
    """Return the polyline with its interior vertices solved to a critical point, or None.

    The solve also moves vertices along the slice, which offsets cannot. It
    is kept only when it lowers the residual without raising the mass.
    """
    if current.is_mesh or np.any(sliding) or not np.any(interior):
        return None
    cls = problem.vector_class
    solved = solve_stationary(domain, current, cls, movable=interior)
    if solved is None:
        return None
    before = stationarity_residual(domain, current, cls, interior)
    after = stationarity_residual(domain, solved, cls, interior)
    if after >= before or slice_mass(domain, solved) > slice_mass(domain, current) + 1e-12:
        return None
    return solved


def _escape(
    domain: AmbientDomain, problem: PlateauProblem, current: Slice, mask: np.ndarray, residual_tol: float
) -> Slice | None:
    """Push a slice with negative second variation in the region along its lowest mode."""
    try:
        spectrum = second_variation_spectrum(
            domain, current, problem.vector_class, count=1, residual_tol=residual_tol, region_mask=mask
        )
    except NotStationary:
        return None
    if spectrum.chart.size == 0 or spectrum.index == 0:
        return None
    mode = spectrum.eigenvectors[:, 0]
    disp = spectrum.chart.displacement(mode / np.max(np.abs(mode)), len(current.vertices))
    base = slice_mass(domain, current)
    amplitude = 0.05 * problem.region.diameter()
    for _ in range(30):
        vertices = current.vertices + amplitude * disp
        wall = spectrum.chart.vertex[spectrum.chart.curvature != 0.0]
        if len(wall):
            vertices[wall] = domain.closest_boundary_point(vertices[wall])
        pushed = current.with_vertices(vertices)
        if np.all(domain.contains(vertices)) and slice_mass(domain, pushed) < base:
            _LOGGER.debug("Escaping saddle with eigenvalue %.3g, amplitude %.3g", spectrum.stability_margin, amplitude)
            return pushed
        amplitude *= 0.5
    return None


def _cone_route(
    domain: AmbientDomain, problem: PlateauProblem, target: Slice, cap: float
) -> tuple[list[float], ConeReport] | None:
    """Return the masses along a blow-down/blow-up path from the slice to target, or None.

    The path is only tried when the region sits within the certified radius
    of the cone estimate and is only returned when it stays below the cap.
    """
    region = problem.region
    radius = getattr(region, "outer", getattr(region, "radius", None))
    if problem.slice.is_mesh or radius is None:
        return None
    limit = certified_radius(domain, problem.slice, problem.energy_cap)
    if region.diameter() > limit:
        _LOGGER.debug("No cone route: region diameter %.3g above the certified radius %.3g", region.diameter(), limit)
        return None
    center = np.asarray(region.center, dtype=float)
    tau = radius * float(np.exp(domain.phi_value(center)))
    try:
        family, report = cone_homotopy(domain, problem.slice, center, tau, target=target)
    except (PlateauError, EstimateViolated) as err:
        _LOGGER.debug("No cone route: %s", err)
        return None
    masses = [slice_mass(domain, s) for s in family]
    if max(masses) > cap:
        return None
    return masses, report


def local_minimize(
    domain: AmbientDomain,
    problem: PlateauProblem,
    residual_tol: float | None = None,
    maxiter: int = 5000,
    escape: bool = True,
) -> PlateauResult:
    """Minimise mass inside the region with everything outside held fixed.

    The recorded trajectory never exceeds mass(slice) + energy_cap; saddle
    points inside the region are left along their lowest eigenvector. When
    the direct descent crosses the cap, its end point is reached instead
    through the cone over the slice on a small sphere around the region.
    """
    start = problem.slice
    base = slice_mass(domain, start)
    cap = base + problem.energy_cap
    if residual_tol is None:
        residual_tol = DEFAULT_RESIDUAL_TOL * max(base, 1e-12) / domain.diameter
    interior, sliding = _movable(domain, problem)
    mask = interior | sliding
    current, masses, converged = _descend(domain, start, interior, sliding, maxiter)
    escapes = 0
    while escape and escapes < _MAX_ESCAPES and np.any(mask):
        pushed = _escape(domain, problem, current, mask, residual_tol)
        if pushed is None:
            break
        escapes += 1
        masses.append(slice_mass(domain, pushed))
        current, more, converged = _descend(domain, pushed, interior, sliding, maxiter)
        masses.extend(more)
    settled = _settle(domain, problem, current, interior, sliding)
    if settled is not None:
        current = settled
        masses.append(slice_mass(domain, current))
    if not np.all(domain.contains(current.vertices)):
        raise BarrierBlocked("Descent left the domain")
    residual = stationarity_residual(domain, current, problem.vector_class, mask) if np.any(mask) else 0.0
    if residual > residual_tol:
        raise BarrierBlocked(f"No admissible descent reached residual {residual_tol:.3e} (at {residual:.3e})")
    cone = None
    if max(masses) > cap:
        route = _cone_route(domain, problem, current, cap)
        if route is None:
            raise BarrierBlocked(f"Trajectory reached {max(masses):.9g} above the cap {cap:.9g}")
        masses, cone = route
        _LOGGER.info("Direct descent crossed the cap, reached its end through a cone at r=%.3g", cone.radius)
    _LOGGER.debug("Local minimisation: %.9g -> %.9g after %d escapes", base, masses[-1], escapes)
    return PlateauResult(current, masses, residual, converged, escapes, mask, cone)


# ---------------------------------------------------------------------------
# cone homotopy


@dataclass
class ConeReport:
    """Measured excess of a blow-down/blow-up homotopy against its analytic bound."""

    center: np.ndarray
    tau: float
    radius: float
    crossings: int
    cone_mass: float
    ball_mass_euclid: float
    c: float
    bound: float
    excess: float
    retries: int

    @property
    def passed(self) -> bool:
        """Return True when the excess stays below the bound."""
        return self.excess <= self.bound

    def to_dict(self) -> dict[str, Any]:
        """Return all constants of the estimate."""
        return {
            "center": self.center.tolist(),
            "tau": self.tau,
            "r": self.radius,
            "crossings": self.crossings,
            "cone_mass": self.cone_mass,
            "ball_mass_euclid": self.ball_mass_euclid,
            "c": self.c,
            "bound": self.bound,
            "measured": self.excess,
            "retries": self.retries,
            "passed": self.passed,
        }


def _crossings(coords: np.ndarray, radius: float, closed: bool, angle_tol: float):
    """Return (segment index, point) of crossings of |z| = radius, or None if not transversal."""
    work = np.vstack([coords, coords[:1]]) if closed else coords
    rho = np.linalg.norm(work, axis=1)
    if np.any(np.abs(rho - radius) <= 1e-12 * max(radius, 1.0)):
        return None
    out = []
    for i in np.nonzero((rho[:-1] - radius) * (rho[1:] - radius) < 0.0)[0]:
        a, b = work[i], work[i + 1]
        d = b - a
        qa, qb, qc = d @ d, 2.0 * (a @ d), a @ a - radius**2
        root = np.sqrt(max(qb * qb - 4.0 * qa * qc, 0.0))
        s = (-qb + root) / (2.0 * qa) if rho[i] < radius else (-qb - root) / (2.0 * qa)
        p = a + s * d
        if abs(d @ p) / (np.linalg.norm(d) * radius) < angle_tol:
            return None
        out.append((int(i), p))
    return out


def _scaled(coords: np.ndarray, radius: float, closed: bool, scale: float) -> np.ndarray:
    """Blow the part inside |z| < radius down by ``scale`` and join it radially to the rest."""
    work = np.vstack([coords, coords[:1]]) if closed else coords
    rho = np.linalg.norm(work, axis=1)
    inside = rho < radius
    crossings = dict(_crossings(coords, radius, closed, 0.0) or [])
    out = []
    for i in range(len(work) - 1):
        out.append(scale * work[i] if inside[i] else work[i])
        if i in crossings:
            p = crossings[i]
            out.extend([p, scale * p] if not inside[i] else [scale * p, p])
    if not closed:
        out.append(scale * work[-1] if inside[-1] else work[-1])
    return np.asarray(out)


def cone_homotopy(
    domain: AmbientDomain,
    slice_: Slice,
    y: np.ndarray,
    tau: float,
    target: Slice | None = None,
    steps: int = 16,
    angle_tol: float = 1e-2,
) -> tuple[list[Slice], ConeReport]:
    """Blow the slice down to the cone over its trace on a small sphere, then up to a target.

    The radius r is picked from (tau, 1.5 tau) with the fewest transversal
    crossings among the radii where the target shares the trace of the slice.
    """
    if slice_.is_mesh:
        raise PlateauError("Cone homotopies are built for polyline slices")
    y = np.asarray(y, dtype=float)
    chart = boundary_normal_chart(domain, y)
    coords = chart.to_chart(slice_.vertices)
    closed = slice_.closed
    target = target or slice_
    target_coords = chart.to_chart(target.vertices)
    best = None
    retries = 0
    mismatched = 0
    for k in range(_JITTER_STEPS):
        r = tau * (1.0 + 0.5 * (k + 0.5) / _JITTER_STEPS)
        found = _crossings(coords, r, closed, angle_tol)
        if found is None:
            retries += 1
            continue
        target_crossings = _crossings(target_coords, r, target.closed, 0.0) or []
        if len(target_crossings) != len(found) or not all(
            np.allclose(p, q, atol=1e-9 * r) for (_, p), (_, q) in zip(found, target_crossings)
        ):
            mismatched += 1
            continue
        if best is None or len(found) < len(best[1]):
            best = (r, found)
    if best is None and mismatched:
        raise PlateauError("Target does not share the trace of the slice on the sphere")
    if best is None:
        raise NotTransversal(f"No transversal radius in ({tau:.3g}, {1.5 * tau:.3g}) around {y.tolist()}")
    radius, crossings = best

    def make(points: np.ndarray) -> Slice:
        return Slice(chart.from_chart(points), None, slice_.bc, slice_.multiplicity)

    family = [make(_scaled(coords, radius, closed, s)) for s in np.linspace(1.0, 0.0, steps)]
    family += [make(_scaled(target_coords, radius, target.closed, s)) for s in np.linspace(0.0, 1.0, steps)[1:]]
    masses = np.array([slice_mass(domain, s) for s in family])
    base = slice_mass(domain, slice_)
    excess = float(np.max(masses) - base)

    cone_mass = radius * len(crossings)
    work = np.vstack([coords, coords[:1]]) if closed else coords
    seg = np.diff(work, axis=0)
    mids = 0.5 * (work[1:] + work[:-1])
    near = np.linalg.norm(mids, axis=1) < 2.0 * tau
    ball_mass = float(np.sum(np.linalg.norm(seg, axis=1)[near]))
    samples = chart.from_chart(np.vstack([mids[near], np.zeros((1, coords.shape[1]))]))
    phi = domain.phi_value(samples) - domain.phi_value(y)
    c = float(np.exp(np.max(np.abs(phi)))) if len(phi) else 1.0
    bound = (4.0 + c * c) * ball_mass
    report = ConeReport(y, float(tau), float(radius), len(crossings), float(cone_mass), ball_mass, c, bound, excess, retries)
    if not report.passed:
        raise EstimateViolated(f"Cone homotopy excess {excess:.3e} exceeds the bound {bound:.3e}")
    _LOGGER.debug("Cone homotopy at %s: r=%.3g, %d crossings, excess %.3e", y.tolist(), radius, len(crossings), excess)
    return family, report


def certified_radius(domain: AmbientDomain, slice_: Slice, energy_cap: float, c: float = 1.0) -> float:
    """Return 2 rho with 2 (4 + c^2) C_M mass rho^n = energy_cap, slightly shrunk to keep it strict."""
    mass = slice_mass(domain, slice_)
    if mass <= 0.0:
        return float(domain.diameter)
    c_m = monotonicity_constant(domain)
    rho = (energy_cap / (2.0 * (4.0 + c * c) * c_m * mass)) ** (1.0 / domain.n)
    return float(2.0 * rho * (1.0 - 1e-9))


# ---------------------------------------------------------------------------
# replacements


def _restart_start(
    domain: AmbientDomain, slice_: Slice, mask: np.ndarray, cap: float, rng: np.random.Generator
) -> Slice | None:
    """Return the slice pushed along its normals at the masked vertices, kept below the cap."""
    vertices = np.array(slice_.vertices)
    normals = vertex_normals(vertices, slice_.faces) if slice_.is_mesh else polyline_normals(vertices)
    step = np.where(mask, rng.normal(size=len(vertices)), 0.0)[:, None] * normals
    amplitude = 0.1 * max_edge_length(vertices, slice_.faces)
    for _ in range(_JITTER_STEPS):
        moved = slice_.with_vertices(vertices + amplitude * step)
        if np.all(domain.contains(moved.vertices)) and slice_mass(domain, moved) <= cap:
            return moved
        amplitude *= 0.5
    return None


def _restart_masses(
    domain: AmbientDomain, problem: PlateauProblem, residual_tol: float, restarts: int, seed: int
) -> list[float]:
    """Return the masses of local minima reached from perturbed copies of the slice."""
    interior, _ = _movable(domain, problem)
    base = slice_mass(domain, problem.slice)
    masses = []
    for rng in (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)):
        start = _restart_start(domain, problem.slice, interior, base + 0.5 * problem.energy_cap, rng)
        if start is None:
            continue
        # the restart keeps the original barrier: its own cap is the unused half
        restart = PlateauProblem(start, problem.region, 0.5 * problem.eps, problem.m, problem.mode)
        try:
            masses.append(local_minimize(domain, restart, residual_tol).masses[-1])
        except PlateauError as err:
            _LOGGER.debug("Restart skipped: %s", err)
    return masses


@dataclass
class Replacement:
    """A slice equal to the input outside a region and stable inside it."""

    slice: Slice
    region: AbstractOpenSet
    mass_before: float
    mass_after: float
    residual_inside: float
    residual_outside: float
    stability_margin: float
    checks: dict[str, bool] = field(default_factory=dict)
    tol_replace: float = DEFAULT_TOL_REPLACE
    restart_masses: list[float] = field(default_factory=list)

    @property
    def mass_delta(self) -> float:
        """Return |mass(slice') - mass(slice)|."""
        return abs(self.mass_after - self.mass_before)

    @property
    def mass_preserved(self) -> bool:
        """Return True when the mass changed by at most tol_replace * mass."""
        return self.mass_delta <= self.tol_replace * max(self.mass_before, 1e-300)

    @property
    def lowered_mass(self) -> bool:
        """Return True when the replacement found a cheaper slice (region not almost minimizing)."""
        return not self.mass_preserved and self.mass_after < self.mass_before

    @property
    def passed(self) -> bool:
        """Return True when every structural check holds."""
        return all(self.checks.values())

    @property
    def limit_spread(self) -> float:
        """Return the largest mass difference between the replacement and the restart minima."""
        masses = [self.mass_after, *self.restart_masses]
        return max(masses) - min(masses)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "region": self.region.to_dict(),
            "mass_before": self.mass_before,
            "mass_after": self.mass_after,
            "mass_delta": self.mass_delta,
            "mass_preserved": self.mass_preserved,
            "lowered_mass": self.lowered_mass,
            "residual_inside": self.residual_inside,
            "residual_outside": self.residual_outside,
            "stability_margin": self.stability_margin,
            "checks": self.checks,
            "restart_masses": self.restart_masses,
            "limit_spread": self.limit_spread,
        }


def _fit_region(region: AbstractOpenSet, radius: float) -> AbstractOpenSet:
    """Return the ball or annulus shrunk to outer radius ``radius`` about its center."""
    if isinstance(region, Annulus):
        return Annulus(region.center, min(region.inner, 0.5 * radius), radius)
    if isinstance(region, Ball):
        return Ball(region.center, radius)
    raise PlateauError(f"Cannot shrink a {region.kind} region to the certified radius")


def construct_replacement(
    domain: AmbientDomain,
    slice_: Slice,
    region: AbstractOpenSet,
    eps: float,
    m: int = 1,
    mode: str | None = None,
    residual_tol: float | None = None,
    spec_tol: float = DEFAULT_SPEC_TOL,
    tol_replace: float = DEFAULT_TOL_REPLACE,
    certified: float | None = None,
    restarts: int = 0,
    seed: int = DEFAULT_SEED,
) -> Replacement:
    """Replace the slice inside a region by a stable local minimiser and verify the result.

    A region wider than twice ``certified`` is shrunk to that radius first.
    The "mass" check fails when the minimiser is cheaper than the slice, so
    ``passed`` means the slice was already almost minimizing in the region.
    With restarts, local minima reached from perturbed copies of the slice
    are compared by mass; a spread above tol_replace is logged, not rejected.
    """
    if mode is None:
        mode = MODE_FREE if slice_.bc == BoundaryCondition.FREE else MODE_CONSTRAINED
    if certified is not None and region.diameter() > 2.0 * certified:
        _LOGGER.warning("Region of diameter %.3g exceeds the certified radius %.3g, shrinking it", region.diameter(), certified)
        region = _fit_region(region, certified)
    problem = PlateauProblem(slice_, region, eps, m, mode)
    base = slice_mass(domain, slice_)
    if residual_tol is None:
        residual_tol = DEFAULT_RESIDUAL_TOL * max(base, 1e-12) / domain.diameter
    result = local_minimize(domain, problem, residual_tol)
    new = result.slice
    outside = ~result.movable
    mass_after = slice_mass(domain, new)
    checks = {
        "exterior": bool(np.array_equal(new.vertices[outside], slice_.vertices[outside])),
        "mass": abs(mass_after - base) <= tol_replace * max(base, 1e-300),
        "residual": result.residual <= residual_tol,
    }
    margin = float("inf")
    if np.any(result.movable):
        spectrum = second_variation_spectrum(
            domain, new, problem.vector_class, count=1, residual_tol=residual_tol,
            spec_tol=spec_tol, region_mask=result.movable,
        )
        margin = spectrum.stability_margin
    checks["stability"] = margin >= -spec_tol
    if mode == MODE_CONSTRAINED and not domain.gamma.is_empty and len(new.boundary_indices()):
        trace = domain.gamma.distance(new.boundary_points())
        checks["trace"] = bool(np.max(trace) <= domain.tol_bdry) and new.multiplicity == 1
    replacement = Replacement(
        new, region, base, mass_after, result.residual,
        stationarity_residual(domain, new, problem.vector_class), margin, checks, tol_replace,
    )
    if restarts > 0:
        replacement.restart_masses = _restart_masses(domain, problem, residual_tol, restarts, seed)
        if replacement.limit_spread > tol_replace * max(base, 1e-300):
            _LOGGER.warning(
                "Local minima from %d restarts differ in mass by %.3e", len(replacement.restart_masses),
                replacement.limit_spread,
            )
    if replacement.lowered_mass:
        _LOGGER.info(
            "Replacement lowered the mass from %.9g to %.9g: slice is not almost minimizing there",
            base, replacement.mass_after,
        )
    return replacement
