"""First variation, stationarity residuals and the pull-tight flow."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Any

import numpy as np
from scipy import optimize

from .ambient import AmbientDomain
from .const import (
    CONSTRAINED,
    DEFAULT_MAX_ITERS,
    DEFAULT_RESIDUAL_TOL,
    DEFAULT_SPEED_SCALE,
    DEFAULT_STEP_SIZE,
    MODE_BODY_3D,
    POLE_TOL,
)
from .exceptions import ClassViolation, StepDiverged
from .geometry import (
    boundary_loops,
    cotangent_laplacian,
    dual_areas,
    mesh_area_gradient,
    polyline_dual_lengths,
    polyline_mass_gradient,
    polyline_normals,
    polyline_segment_masses,
    resample_polyline,
    revolve_profile,
    triangle_areas,
    vertex_normals,
)
from .parallel import map_ordered
from .sweepout import BoundaryCondition, Slice, SweepoutFamily, slice_mass

_LOGGER = logging.getLogger(__name__)

_ARMIJO_HALVINGS = 30


class VectorFieldClass(str, Enum):
    """Admissible variation fields."""

    VANISH_ON_BOUNDARY = "vanish"
    TANGENT_TO_BOUNDARY = "tangent"
    INWARD_VANISH_ON_GAMMA = "inward"


def class_for_mode(mode: str) -> VectorFieldClass:
    """Return the variation class used for a family mode."""
    if mode == CONSTRAINED:
        return VectorFieldClass.INWARD_VANISH_ON_GAMMA
    return VectorFieldClass.TANGENT_TO_BOUNDARY


# ---------------------------------------------------------------------------
# per-slice kernels


def mass_gradient(domain: AmbientDomain, slice_: Slice) -> np.ndarray:
    """Return the gradient of slice_mass with respect to every vertex."""
    vertices = slice_.vertices
    if slice_.is_trivial:
        return np.zeros_like(vertices)
    if slice_.is_mesh:
        grad = mesh_area_gradient(vertices, slice_.faces)
    else:
        grad = polyline_mass_gradient(vertices, domain.phi, closed=slice_.closed)
    return grad * slice_.multiplicity


def vertex_measures(domain: AmbientDomain, slice_: Slice) -> np.ndarray:
    """Return metric dual lengths (2-D) or dual areas (3-D) per vertex."""
    if slice_.is_mesh:
        return dual_areas(slice_.vertices, slice_.faces) * slice_.multiplicity
    dual = polyline_dual_lengths(slice_.vertices, closed=slice_.closed)
    return dual * np.exp(domain.phi_value(slice_.vertices)) * slice_.multiplicity


def _boundary_weights(slice_: Slice) -> np.ndarray:
    """Return the normalisation of boundary rows: 1 at polyline ends, dual boundary length on meshes."""
    idx = slice_.boundary_indices()
    if not slice_.is_mesh:
        return np.ones(len(idx))
    weight = np.zeros(len(slice_.vertices))
    for loop in boundary_loops(slice_.faces):
        pts = slice_.vertices[loop]
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        weight[loop] += 0.5 * seg + 0.5 * np.roll(seg, 1)
    return np.maximum(weight[idx], 1e-300)


def _jacobi_diagonal(domain: AmbientDomain, slice_: Slice) -> np.ndarray:
    """Return a diagonal bound of the mass Hessian per vertex."""
    vertices = slice_.vertices
    if slice_.is_mesh:
        weights = abs(cotangent_laplacian(vertices, slice_.faces))
        diag = 0.5 * np.asarray(weights.sum(axis=1)).ravel()
    else:
        work = np.vstack([vertices, vertices[:1]]) if slice_.closed else vertices
        seg = polyline_segment_masses(work, domain.phi)
        lengths = np.linalg.norm(np.diff(work, axis=0), axis=1)
        stiff = seg / np.maximum(lengths, 1e-300) ** 2
        diag = np.zeros(len(work))
        diag[:-1] += stiff
        diag[1:] += stiff
        if slice_.closed:
            diag[0] += diag[-1]
            diag = diag[:-1]
    return np.maximum(diag * slice_.multiplicity, 1e-12)


@dataclass
class ConstraintMasks:
    """Which vertices sit on gamma, on the boundary of M, or on the slice boundary."""

    on_gamma: np.ndarray
    on_wall: np.ndarray
    slice_boundary: np.ndarray
    normals: np.ndarray


def constraint_masks(domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass) -> ConstraintMasks:
    """Classify vertices for the given variation class."""
    vertices = slice_.vertices
    n = len(vertices)
    tol = domain.tol_bdry
    on_gamma = np.zeros(n, dtype=bool)
    on_wall = np.zeros(n, dtype=bool)
    slice_boundary = np.zeros(n, dtype=bool)
    slice_boundary[slice_.boundary_indices()] = True
    normals = np.zeros_like(vertices)
    if not domain.gamma.is_empty:
        on_gamma = domain.gamma.distance(vertices) <= tol
    # only slice boundary vertices can touch the wall for the tangent class
    candidates = np.arange(n) if cls == VectorFieldClass.INWARD_VANISH_ON_GAMMA else np.nonzero(slice_boundary)[0]
    if len(candidates):
        pts = vertices[candidates]
        touching = np.abs(domain.signed_distance(pts)) <= tol
        on_wall[candidates[touching]] = True
        if np.any(touching):
            normals[candidates[touching]] = domain.inward_normal(pts[touching])
    return ConstraintMasks(on_gamma, on_wall, slice_boundary, normals)


def _check_field(masks: ConstraintMasks, vector_field: np.ndarray, cls: VectorFieldClass) -> None:
    scale = max(1.0, float(np.max(np.abs(vector_field))) if vector_field.size else 1.0)
    tol = 1e-9 * scale
    norm = np.linalg.norm(vector_field, axis=1)
    normal_part = np.sum(vector_field * masks.normals, axis=1)
    if cls == VectorFieldClass.VANISH_ON_BOUNDARY:
        bad = (masks.slice_boundary | masks.on_gamma) & (norm > tol)
        if np.any(bad):
            raise ClassViolation(f"Field does not vanish at boundary vertex {int(np.argmax(bad))}")
    elif cls == VectorFieldClass.TANGENT_TO_BOUNDARY:
        bad = masks.on_wall & (np.abs(normal_part) > tol)
        if np.any(bad):
            raise ClassViolation(f"Field is not tangent to the boundary at vertex {int(np.argmax(bad))}")
    else:
        bad = masks.on_gamma & (norm > tol)
        if np.any(bad):
            raise ClassViolation(f"Field does not vanish on gamma at vertex {int(np.argmax(bad))}")
        bad = masks.on_wall & ~masks.on_gamma & (normal_part < -tol)
        if np.any(bad):
            raise ClassViolation(f"Field points outward at vertex {int(np.argmax(bad))}")


def first_variation(
    domain: AmbientDomain, slice_: Slice, vector_field: np.ndarray, cls: VectorFieldClass
) -> float:
    """Return d/de slice_mass(x + e * field) at e = 0.

    The field is checked against the class constraints first.
    """
    vector_field = np.asarray(vector_field, dtype=float)
    if vector_field.shape != slice_.vertices.shape:
        raise ClassViolation(
            f"Field shape {vector_field.shape} does not match vertices {slice_.vertices.shape}"
        )
    masks = constraint_masks(domain, slice_, VectorFieldClass(cls))
    _check_field(masks, vector_field, VectorFieldClass(cls))
    return float(np.sum(mass_gradient(domain, slice_) * vector_field))


def project_gradient(
    grad: np.ndarray, masks: ConstraintMasks, cls: VectorFieldClass
) -> np.ndarray:
    """Project a mass gradient so that its negative is an admissible direction."""
    out = grad.copy()
    if cls == VectorFieldClass.VANISH_ON_BOUNDARY:
        out[masks.slice_boundary | masks.on_gamma] = 0.0
        return out
    normal_part = np.sum(out * masks.normals, axis=1)
    if cls == VectorFieldClass.TANGENT_TO_BOUNDARY:
        wall = masks.on_wall & masks.slice_boundary
        out[wall] -= normal_part[wall, None] * masks.normals[wall]
        return out
    # one-sided class: only inward motions off the wall are admissible
    wall = masks.on_wall & ~masks.on_gamma
    clip = np.maximum(normal_part, 0.0)
    out[wall] -= clip[wall, None] * masks.normals[wall]
    out[masks.on_gamma] = 0.0
    return out


def _residual_norm(
    domain: AmbientDomain, slice_: Slice, projected: np.ndarray, masks: ConstraintMasks, mask: np.ndarray | None = None
) -> float:
    measures = vertex_measures(domain, slice_)
    region = np.ones(len(measures), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    interior = ~masks.slice_boundary & region
    safe = np.maximum(measures, 1e-300)
    inner = float(np.sqrt(np.sum(np.sum(projected[interior] ** 2, axis=1) / safe[interior])))
    idx = slice_.boundary_indices()
    keep = region[idx]
    edge = 0.0
    if np.any(keep):
        rows = np.linalg.norm(projected[idx], axis=1) / _boundary_weights(slice_)
        edge = float(np.max(rows[keep]))
    return max(inner, edge)


def stationarity_residual(
    domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass, mask: np.ndarray | None = None
) -> float:
    """Return the size of the class-projected mass gradient (0 iff stationary).

    Interior rows are measured as an L2 density, boundary rows pointwise so
    that a chord meeting the wall at an angle contributes the sine of its
    angle defect. ``mask`` restricts the measurement to some vertices.
    """
    if slice_.is_trivial:
        return 0.0
    cls = VectorFieldClass(cls)
    masks = constraint_masks(domain, slice_, cls)
    projected = project_gradient(mass_gradient(domain, slice_), masks, cls)
    return _residual_norm(domain, slice_, projected, masks, mask)


# ---------------------------------------------------------------------------
# pull-tight


@dataclass
class TightenParams:
    """Step control of the pull-tight flow.

    ``speed_cap`` is T(r) = r / (r + speed_scale), zero at zero residual.
    ``damping`` is b = min(1, d / damping_width) with d the parameter
    distance to the boundary of P, so boundary slices never move.
    """

    step_size: float = DEFAULT_STEP_SIZE
    max_iters: int = DEFAULT_MAX_ITERS
    residual_tol: float | None = None
    speed_scale: float = DEFAULT_SPEED_SCALE
    damping_width: float = 0.05
    smoothing: bool = True

    def speed_cap(self, residual: float) -> float:
        """Return T(residual)."""
        residual = max(float(residual), 0.0)
        return residual / (residual + self.speed_scale)

    def damping(self, distance: np.ndarray) -> np.ndarray:
        """Return b(distance) in [0, 1]."""
        return np.clip(np.asarray(distance, dtype=float) / self.damping_width, 0.0, 1.0)

    @classmethod
    def from_dict(cls, data: dict[str, Any] | None) -> TightenParams:
        """Build from a validated config section."""
        data = data or {}
        return cls(
            step_size=data.get("step_size", DEFAULT_STEP_SIZE),
            max_iters=data.get("max_iters", DEFAULT_MAX_ITERS),
            residual_tol=data.get("residual_tol"),
            speed_scale=data.get("speed_scale", DEFAULT_SPEED_SCALE),
            damping_width=data.get("damping_width", 0.05),
            smoothing=data.get("smoothing", True),
        )


@dataclass
class TightenTrace:
    """Per-iteration record of the flow."""

    iterations: list[int] = field(default_factory=list)
    m0: list[float] = field(default_factory=list)
    argmax_t: list[tuple[int, ...]] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    moved: list[int] = field(default_factory=list)
    residual_tol: float = 0.0
    converged: bool = False

    def append(self, iteration: int, m0: float, argmax: tuple[int, ...], residual: float, moved: int) -> None:
        """Record one iteration."""
        self.iterations.append(iteration)
        self.m0.append(m0)
        self.argmax_t.append(argmax)
        self.residual.append(residual)
        self.moved.append(moved)

    def rows(self) -> list[dict[str, Any]]:
        """Return CSV rows (iter, m0, argmax_t, residual, moved)."""
        return [
            {
                "iter": it,
                "m0": m,
                "argmax_t": ":".join(str(i) for i in t),
                "residual": r,
                "moved": mv,
            }
            for it, m, t, r, mv in zip(self.iterations, self.m0, self.argmax_t, self.residual, self.moved)
        ]


@dataclass
class _SliceStep:
    index: tuple[int, ...]
    direction: np.ndarray | None
    grad: np.ndarray | None
    residual: float
    masks: ConstraintMasks | None


def _descent(domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass, index) -> _SliceStep:
    if slice_.is_trivial:
        return _SliceStep(index, None, None, 0.0, None)
    masks = constraint_masks(domain, slice_, cls)
    grad = mass_gradient(domain, slice_)
    projected = project_gradient(grad, masks, cls)
    residual = _residual_norm(domain, slice_, projected, masks)
    direction = _normal_motion(slice_, -projected / _jacobi_diagonal(domain, slice_)[:, None], masks)
    return _SliceStep(index, direction, grad, residual, masks)


def _normal_motion(slice_: Slice, direction: np.ndarray, masks: ConstraintMasks) -> np.ndarray:
    """Keep only the normal part of a polyline step at free interior vertices.

    Tangential motion of an interior vertex only reparametrizes the curve.
    """
    vertices = slice_.vertices
    if slice_.is_mesh or vertices.shape[1] != 2 or len(vertices) < 3:
        return direction
    if slice_.closed:
        tangent = np.roll(vertices, -1, axis=0) - np.roll(vertices, 1, axis=0)
        tangent /= np.maximum(np.linalg.norm(tangent, axis=1, keepdims=True), 1e-300)
        normals = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
    else:
        normals = polyline_normals(vertices)
    free = ~masks.slice_boundary & ~masks.on_wall & ~masks.on_gamma
    out = direction.copy()
    out[free] = np.sum(direction[free] * normals[free], axis=1)[:, None] * normals[free]
    return out


def _redistribute(domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass) -> Slice | None:
    """Slide the vertices of an open polyline to equal metric spacing along it.

    Returns None when the slide does not lower the mass.
    """
    if slice_.is_trivial or slice_.is_mesh or slice_.closed or len(slice_.vertices) < 3:
        return None
    vertices = slice_.vertices
    spacing = polyline_segment_masses(vertices, domain.phi)
    moved = resample_polyline(vertices, len(vertices), spacing)
    candidate = slice_.with_vertices(moved)
    if slice_mass(domain, candidate) > slice_mass(domain, slice_):
        return None
    return candidate


def _apply(domain: AmbientDomain, slice_: Slice, step: np.ndarray, masks: ConstraintMasks, cls: VectorFieldClass) -> Slice:
    """Move vertices, pin gamma and put wall vertices back on the wall."""
    vertices = slice_.vertices + step
    if not np.all(np.isfinite(vertices)):
        raise StepDiverged("Step produced non-finite vertices")
    vertices[masks.on_gamma] = slice_.vertices[masks.on_gamma]
    reproject = masks.on_wall & ~masks.on_gamma
    if cls == VectorFieldClass.TANGENT_TO_BOUNDARY:
        reproject &= masks.slice_boundary
    if np.any(reproject):
        vertices[reproject] = domain.closest_boundary_point(vertices[reproject])
    outside = domain.signed_distance(vertices) < 0.0
    movable = outside & ~masks.on_gamma
    if np.any(movable):
        vertices[movable] = domain.closest_boundary_point(vertices[movable])
    return slice_.with_ring_vertices(vertices)


def _line_search(
    domain: AmbientDomain,
    slice_: Slice,
    step: np.ndarray,
    masks: ConstraintMasks,
    cls: VectorFieldClass,
    mass: float,
) -> tuple[Slice, float] | None:
    alpha = 1.0
    for _ in range(_ARMIJO_HALVINGS):
        candidate = _apply(domain, slice_, alpha * step, masks, cls)
        new_mass = slice_mass(domain, candidate)
        if new_mass < mass:
            return candidate, new_mass
        alpha *= 0.5
    return None


def _smooth_directions(family: SweepoutFamily, steps: dict[tuple[int, ...], np.ndarray]) -> dict[tuple[int, ...], np.ndarray]:
    """Average step fields over lattice neighbours with matching shapes (1-2-1 per axis)."""
    out = dict(steps)
    for axis in range(family.k):
        current = dict(out)
        for index, direction in current.items():
            total = 2.0 * direction
            weight = 2.0
            for delta in (-1, 1):
                other = list(index)
                other[axis] += delta
                other = tuple(other)
                if not 0 <= other[axis] < family.shape[axis]:
                    continue
                neighbour = current.get(other)
                if neighbour is None:
                    # frozen neighbours contribute a zero step
                    if family[other].vertices.shape == direction.shape:
                        weight += 1.0
                    continue
                if neighbour.shape == direction.shape:
                    total = total + neighbour
                    weight += 1.0
            out[index] = total / weight
    return out


def _polish(
    domain: AmbientDomain,
    family: SweepoutFamily,
    slices: np.ndarray,
    masses: np.ndarray,
    damping: np.ndarray,
    cls: VectorFieldClass,
    trace: TightenTrace,
) -> None:
    """Bring the heaviest slices to stationarity without raising their mass.

    Each slice first has its vertices redistributed, then a nearby critical
    slice is solved for; a candidate is kept when it lowers the residual.
    """
    visited: set[tuple[int, ...]] = set()
    moved = 0
    while True:
        argmax = tuple(int(i) for i in np.unravel_index(int(np.argmax(masses)), family.shape))
        residual = stationarity_residual(domain, slices[argmax], cls)
        if argmax in visited or residual <= trace.residual_tol or damping[argmax] == 0.0:
            break
        visited.add(argmax)
        current, current_residual = slices[argmax], residual
        for polish in (_redistribute, solve_stationary):
            candidate = polish(domain, current, cls)
            if candidate is None or slice_mass(domain, candidate) > masses[argmax] + 1e-12:
                continue
            candidate_residual = stationarity_residual(domain, candidate, cls)
            if candidate_residual < current_residual:
                current, current_residual = candidate, candidate_residual
        if current is slices[argmax]:
            break
        slices[argmax] = current
        masses[argmax] = slice_mass(domain, current)
        moved += 1
        _LOGGER.debug("Polished slice %s: residual %.3e -> %.3e", argmax, residual, current_residual)
    trace.append(trace.iterations[-1] + 1, float(np.max(masses)), argmax, residual, moved)
    trace.converged = residual <= trace.residual_tol


def pull_tight(
    domain: AmbientDomain, family: SweepoutFamily, params: TightenParams | None = None
) -> tuple[SweepoutFamily, TightenTrace]:
    """Deform every slice along its projected mass gradient.

    Slice masses never increase, slices on the boundary of P are kept
    bit-exactly, gamma vertices never move.
    """
    params = params or TightenParams()
    cls = class_for_mode(family.mode)
    damping = params.damping(family.lattice_distance_to_boundary())
    slices = family.slices.copy()
    slices.setflags(write=True)
    masses = family.masses(domain)
    tol = params.residual_tol
    if tol is None:
        tol = DEFAULT_RESIDUAL_TOL * float(np.max(masses)) / domain.diameter
    trace = TightenTrace(residual_tol=tol)
    for s in slices.ravel():
        if not s.is_trivial and not np.all(domain.contains(s.vertices)):
            raise StepDiverged("Family has a slice outside the domain")

    _LOGGER.info("Pull-tight: %d slices, class %s, residual tol %.3g", family.size, cls.value, tol)
    for iteration in range(params.max_iters):
        active = [index for index in family.indices() if damping[index] > 0.0]
        steps = map_ordered(lambda index: _descent(domain, slices[index], cls, index), active)
        by_index = {s.index: s for s in steps}
        argmax = tuple(int(i) for i in np.unravel_index(int(np.argmax(masses)), family.shape))
        if argmax in by_index:
            residual = by_index[argmax].residual
        else:
            residual = stationarity_residual(domain, slices[argmax], cls)

        directions: dict[tuple[int, ...], np.ndarray] = {}
        for s in steps:
            if s.direction is None:
                continue
            speed = params.speed_cap(s.residual) * float(damping[s.index])
            directions[s.index] = params.step_size * speed * s.direction
        if params.smoothing:
            smoothed = _smooth_directions(family, directions)
            for index, direction in smoothed.items():
                direction = _normal_motion(slices[index], direction, by_index[index].masks)
                # keep the smoothed field only where it is still a descent direction
                if np.sum(by_index[index].grad * direction) < 0.0:
                    directions[index] = direction

        def advance(index):
            s = by_index[index]
            if not np.any(directions[index]):
                return index, None
            return index, _line_search(domain, slices[index], directions[index], s.masks, cls, masses[index])

        moved = 0
        for index, result in map_ordered(advance, list(directions)):
            if result is None:
                continue
            slices[index], new_mass = result
            if new_mass > masses[index] + 1e-12:
                raise StepDiverged(f"Mass increased at {index}")
            masses[index] = new_mass
            moved += 1
        m0 = float(np.max(masses))
        if trace.m0 and m0 > trace.m0[-1] + 1e-12:
            raise StepDiverged(f"Max mass increased from {trace.m0[-1]} to {m0}")
        trace.append(iteration, m0, argmax, residual, moved)
        _LOGGER.debug("Pull-tight iter %d: m0=%.9g residual=%.3e moved=%d", iteration, m0, residual, moved)
        if residual <= tol:
            trace.converged = True
            break
        if moved == 0:
            break
    if trace.iterations and not trace.converged:
        _polish(domain, family, slices, masses, damping, cls, trace)
    out = SweepoutFamily(slices, family.mode)
    final = trace.residual[-1] if trace.residual else 0.0
    _LOGGER.info(
        "Pull-tight finished after %d iterations: m0=%.9g residual=%.3e",
        len(trace.iterations),
        trace.m0[-1] if trace.m0 else float(np.max(masses)),
        final,
    )
    return out, trace


# ---------------------------------------------------------------------------
# single-slice relaxation


def _profile_dofs(slice_: Slice) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the profile and its free radius and height rows (ends and pole radii stay)."""
    profile = np.array(slice_.profile, dtype=float)
    poles = profile[:, 0] <= POLE_TOL
    interior = np.arange(1, len(profile) - 1)
    return profile, interior[~poles[interior]], interior


def _profile_area(slice_: Slice, profile: np.ndarray, free_r: np.ndarray, free_z: np.ndarray):
    """Return the area of the revolved profile and its ring-summed radial and vertical gradients."""
    vertices, faces = revolve_profile(profile, slice_.n_theta)
    area = float(np.sum(triangle_areas(vertices, faces)))
    grad = mesh_area_gradient(vertices, faces)
    offsets = slice_.ring_offsets()
    ring = np.repeat(np.arange(len(profile)), np.diff(offsets))
    radius = np.linalg.norm(vertices[:, :2], axis=1)
    radial = np.sum(grad[:, :2] * vertices[:, :2], axis=1) / np.maximum(radius, 1e-300)
    g_r = np.bincount(ring, weights=radial, minlength=len(profile))[free_r]
    g_z = np.bincount(ring, weights=grad[:, 2], minlength=len(profile))[free_z]
    return area, g_r, g_z


def _relax_profile(domain: AmbientDomain, slice_: Slice, maxiter: int) -> Slice:
    profile, free_r, free_z = _profile_dofs(slice_)

    def unpack(x):
        work = profile.copy()
        work[free_r, 0] = x[: len(free_r)]
        work[free_z, 1] = x[len(free_r) :]
        return work

    def fun(x):
        area, g_r, g_z = _profile_area(slice_, unpack(x), free_r, free_z)
        return area * slice_.multiplicity, np.concatenate([g_r, g_z]) * slice_.multiplicity

    x0 = np.concatenate([profile[free_r, 0], profile[free_z, 1]])
    bounds = [(1e-9, None)] * len(free_r) + [(None, None)] * len(free_z)
    res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                            options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
    _LOGGER.debug("Profile relaxation: %s after %d iterations", res.message, res.nit)
    work = unpack(res.x)
    vertices, faces = revolve_profile(work, slice_.n_theta)
    return Slice(vertices, faces, slice_.bc, slice_.multiplicity, work, slice_.n_theta)


def _stationary_profile(domain: AmbientDomain, slice_: Slice, maxiter: int) -> Slice:
    """Solve for a nearby critical profile; saddles are found as well as minima."""
    profile, free_r, free_z = _profile_dofs(slice_)
    sizes = np.diff(slice_.ring_offsets())
    ring = np.repeat(np.arange(len(profile)), sizes)
    measure = np.bincount(ring, weights=dual_areas(slice_.vertices, slice_.faces), minlength=len(profile))
    scale = np.sqrt(np.maximum(measure, 1e-300))

    def unpack(x):
        work = profile.copy()
        work[free_r, 0] = x[: len(free_r)]
        work[free_z, 1] = x[len(free_r) :]
        return work

    def rows(x):
        _, g_r, g_z = _profile_area(slice_, unpack(x), free_r, free_z)
        return np.concatenate([g_r / scale[free_r], g_z / scale[free_z]])

    x0 = np.concatenate([profile[free_r, 0], profile[free_z, 1]])
    lower = np.concatenate([np.full(len(free_r), 1e-9), np.full(len(free_z), -np.inf)])
    res = optimize.least_squares(rows, x0, bounds=(lower, np.inf), max_nfev=maxiter, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    _LOGGER.debug("Profile stationarity solve: %s after %d evaluations", res.message, res.nfev)
    work = unpack(res.x)
    vertices, faces = revolve_profile(work, slice_.n_theta)
    return Slice(vertices, faces, slice_.bc, slice_.multiplicity, work, slice_.n_theta)


def _stationary_polyline(domain: AmbientDomain, slice_: Slice, movable: np.ndarray, maxiter: int) -> Slice:
    """Solve for a nearby critical polyline moving only the ``movable`` vertices."""
    vertices0 = np.array(slice_.vertices)
    n_free = int(movable.sum())
    scale = np.sqrt(np.maximum(vertex_measures(domain, slice_)[movable], 1e-300))

    def unpack(x):
        vertices = vertices0.copy()
        vertices[movable] = x.reshape(n_free, 2)
        return vertices

    def rows(x):
        grad = polyline_mass_gradient(unpack(x), domain.phi)[movable]
        return (grad / scale[:, None]).ravel()

    res = optimize.least_squares(rows, vertices0[movable].ravel(), max_nfev=maxiter, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    _LOGGER.debug("Polyline stationarity solve: %s after %d evaluations", res.message, res.nfev)
    return slice_.with_vertices(unpack(res.x))


def solve_stationary(
    domain: AmbientDomain,
    slice_: Slice,
    cls: VectorFieldClass,
    maxiter: int = 50,
    movable: np.ndarray | None = None,
) -> Slice | None:
    """Return a nearby critical slice with the same boundary, or None when there is no solver for it.

    Polylines must keep both ends and stay off the wall; ``movable`` narrows
    the solve to some of their interior vertices. Meshes must be revolved.
    """
    if slice_.is_trivial or slice_.closed:
        return None
    if slice_.is_mesh:
        if slice_.profile is None or not slice_.n_theta:
            return None
        candidate = _stationary_profile(domain, slice_, maxiter)
    else:
        if slice_.bc == BoundaryCondition.FREE and cls != VectorFieldClass.VANISH_ON_BOUNDARY:
            return None
        masks = constraint_masks(domain, slice_, cls)
        free = ~masks.slice_boundary if movable is None else movable & ~masks.slice_boundary
        if np.any(masks.on_wall & free) or not np.any(free):
            return None
        candidate = _stationary_polyline(domain, slice_, free, maxiter)
    if not np.all(domain.contains(candidate.vertices)):
        return None
    return candidate


def _relax_mesh(domain: AmbientDomain, slice_: Slice, maxiter: int) -> Slice:
    vertices0 = np.array(slice_.vertices)
    faces = slice_.faces
    movable = np.ones(len(vertices0), dtype=bool)
    movable[slice_.boundary_indices()] = False
    normals = vertex_normals(vertices0, faces)[movable]

    def fun(u):
        vertices = vertices0.copy()
        vertices[movable] += u[:, None] * normals
        area = float(np.sum(triangle_areas(vertices, faces)))
        grad = mesh_area_gradient(vertices, faces)[movable]
        return area * slice_.multiplicity, np.sum(grad * normals, axis=1) * slice_.multiplicity

    res = optimize.minimize(fun, np.zeros(int(movable.sum())), jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
    vertices = vertices0.copy()
    vertices[movable] += res.x[:, None] * normals
    return slice_.with_vertices(vertices)


def _relax_polyline(domain: AmbientDomain, slice_: Slice, cls: VectorFieldClass, maxiter: int) -> Slice:
    vertices0 = np.array(slice_.vertices)
    phi = domain.phi
    closed = slice_.closed
    free_ends = (
        not closed
        and slice_.bc == BoundaryCondition.FREE
        and cls != VectorFieldClass.VANISH_ON_BOUNDARY
    )
    boundary = domain.boundary
    n = len(vertices0)

    if closed:
        def unpack(x):
            return x.reshape(n, 2)
        x0 = vertices0.ravel()
    elif free_ends:
        s0 = boundary.closest_parameter(vertices0[[0, -1]])

        def unpack(x):
            ends = boundary.point(x[:2])
            return np.vstack([ends[0], x[2:].reshape(n - 2, 2), ends[1]])
        x0 = np.concatenate([s0, vertices0[1:-1].ravel()])
    else:
        def unpack(x):
            return np.vstack([vertices0[0], x.reshape(n - 2, 2), vertices0[-1]])
        x0 = vertices0[1:-1].ravel()

    def fun(x):
        verts = unpack(x)
        mass = float(np.sum(polyline_segment_masses(verts, phi, closed=closed)))
        grad = polyline_mass_gradient(verts, phi, closed=closed)
        if closed:
            flat = grad.ravel()
        elif free_ends:
            d_ends = boundary.derivative(x[:2])
            flat = np.concatenate([
                [grad[0] @ d_ends[0], grad[-1] @ d_ends[1]],
                grad[1:-1].ravel(),
            ])
        else:
            flat = grad[1:-1].ravel()
        return mass * slice_.multiplicity, flat * slice_.multiplicity

    res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
    _LOGGER.debug("Polyline relaxation: %s after %d iterations", res.message, res.nit)
    verts = unpack(res.x)
    if not np.all(domain.contains(verts)):
        raise StepDiverged("Relaxed polyline left the domain")
    return slice_.with_vertices(verts)


def relax_slice(
    domain: AmbientDomain,
    slice_: Slice,
    cls: VectorFieldClass | None = None,
    maxiter: int = 5000,
) -> Slice:
    """Minimise the mass of one slice with its boundary held in its class.

    Constrained polylines keep their endpoints, free ones slide them along
    the boundary of M. Axisymmetric meshes are relaxed through their
    profile, other meshes by normal offsets of their interior vertices.
    """
    if slice_.is_trivial:
        return slice_
    if cls is None:
        cls = (
            VectorFieldClass.TANGENT_TO_BOUNDARY
            if slice_.bc == BoundaryCondition.FREE
            else VectorFieldClass.INWARD_VANISH_ON_GAMMA
        )
    cls = VectorFieldClass(cls)
    if slice_.is_mesh:
        if domain.mode != MODE_BODY_3D:
            raise StepDiverged("Mesh slices need a 3-D domain")
        if slice_.profile is not None and slice_.n_theta:
            return _relax_profile(domain, slice_, maxiter)
        return _relax_mesh(domain, slice_, maxiter)
    return _relax_polyline(domain, slice_, cls, maxiter)
