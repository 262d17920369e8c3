"""Discrete slices, sweepout families and the two family builders."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Any, Iterator

import numpy as np
from scipy import optimize
from scipy.spatial.distance import directed_hausdorff

from .ambient import AmbientDomain
from .const import (
    CONSTRAINED,
    DEFAULT_CONTINUITY_FACTOR,
    DEFAULT_FACE_AREA_MIN,
    DEFAULT_FAMILY_RESOLUTION,
    DEFAULT_FIBRE_COLLAR,
    DEFAULT_LEVEL_SET_TILT,
    DEFAULT_POLYLINE_VERTICES,
    DEFAULT_STRICT_MARGIN,
    MODE_BODY_3D,
    POLE_TOL,
    UNCONSTRAINED,
)
from .exceptions import (
    DegenerateGeometry,
    EmptyFamily,
    IncompatibleSlices,
    NoCommonBoundary,
    NotDisjoint,
    SweepoutError,
)
from .geometry import (
    boundary_loops,
    disk_mesh,
    max_edge_length,
    polyline_segment_masses,
    resample_polyline,
    revolve_profile,
    triangle_areas,
)
from .parallel import map_ordered

_LOGGER = logging.getLogger(__name__)

DEFAULT_MASS_CONTINUITY = 0.05  # x max slice mass


class BoundaryCondition(str, Enum):
    """Boundary condition carried by a slice."""

    CONSTRAINED = "constrained"
    FREE = "free"
    CLOSED = "closed"
    TRIVIAL = "trivial"


@dataclass(frozen=True, eq=False)
class Slice:
    """A discrete hypersurface: polyline (2-D) or triangle mesh (3-D).

    ``profile`` and ``n_theta`` are set for meshes obtained by revolving an
    (r, z) profile around the z axis; connecting sweepouts interpolate the
    profiles instead of the vertices.
    """

    vertices: np.ndarray
    faces: np.ndarray | None = None
    bc: BoundaryCondition = BoundaryCondition.CONSTRAINED
    multiplicity: int = 1
    profile: np.ndarray | None = None
    n_theta: int = 0

    def __post_init__(self) -> None:
        """Normalise arrays and check shapes."""
        vertices = np.array(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise DegenerateGeometry(f"Slice vertices must be (n, 2) or (n, 3), got {vertices.shape}")
        if not np.all(np.isfinite(vertices)):
            raise DegenerateGeometry("Slice vertices contain non-finite values")
        vertices.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "bc", BoundaryCondition(self.bc))
        if int(self.multiplicity) < 1 or int(self.multiplicity) != self.multiplicity:
            raise DegenerateGeometry(f"Multiplicity must be a positive integer, got {self.multiplicity}")
        object.__setattr__(self, "multiplicity", int(self.multiplicity))
        if self.faces is not None:
            faces = np.array(self.faces, dtype=int).reshape(-1, 3)
            if len(faces) and (faces.min() < 0 or faces.max() >= len(vertices)):
                raise DegenerateGeometry("Face indices out of range")
            faces.setflags(write=False)
            object.__setattr__(self, "faces", faces)
        if self.profile is not None:
            profile = np.array(self.profile, dtype=float)
            profile.setflags(write=False)
            object.__setattr__(self, "profile", profile)

    @property
    def is_mesh(self) -> bool:
        """Return True for triangle meshes."""
        return self.faces is not None

    @property
    def is_trivial(self) -> bool:
        """Return True for point or empty slices (mass zero)."""
        if self.bc == BoundaryCondition.TRIVIAL:
            return True
        if self.is_mesh:
            return len(self.faces) == 0
        return len(self.vertices) < 2

    @property
    def closed(self) -> bool:
        """Return True for closed polylines."""
        return self.bc == BoundaryCondition.CLOSED and not self.is_mesh

    def boundary_indices(self) -> np.ndarray:
        """Return indices of boundary vertices (polyline ends or mesh boundary loops)."""
        if self.is_trivial or self.closed:
            return np.zeros(0, dtype=int)
        if self.is_mesh:
            loops = boundary_loops(self.faces)
            return np.concatenate(loops) if loops else np.zeros(0, dtype=int)
        return np.array([0, len(self.vertices) - 1])

    def boundary_points(self) -> np.ndarray:
        """Return the boundary vertices."""
        return self.vertices[self.boundary_indices()]

    def with_vertices(self, vertices: np.ndarray, keep_profile: bool = False) -> Slice:
        """Return a copy with new vertex positions."""
        return Slice(
            vertices,
            self.faces,
            self.bc,
            self.multiplicity,
            self.profile if keep_profile else None,
            self.n_theta if keep_profile else 0,
        )

    def ring_offsets(self) -> np.ndarray:
        """Return the first vertex of every profile ring of a revolved mesh, plus the vertex count."""
        poles = self.profile[:, 0] <= POLE_TOL
        return np.concatenate([[0], np.cumsum(np.where(poles, 1, self.n_theta))])

    def with_ring_vertices(self, vertices: np.ndarray) -> Slice:
        """Return a copy with new vertex positions, re-reading the profile of a revolved mesh.

        Ring j's profile point becomes its mean distance to the z axis and its
        mean height, so equivariant steps keep the profile exact.
        """
        if self.profile is None or not self.n_theta:
            return self.with_vertices(vertices)
        vertices = np.asarray(vertices, dtype=float)
        offsets = self.ring_offsets()
        radius = np.linalg.norm(vertices[:, :2], axis=1)
        profile = np.array(
            [
                [np.mean(radius[lo:hi]), np.mean(vertices[lo:hi, 2])]
                for lo, hi in zip(offsets[:-1], offsets[1:])
            ]
        )
        profile[self.profile[:, 0] <= POLE_TOL, 0] = 0.0
        return Slice(vertices, self.faces, self.bc, self.multiplicity, profile, self.n_theta)

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON description."""
        data: dict[str, Any] = {
            "vertices": self.vertices.tolist(),
            "bc": self.bc.value,
            "multiplicity": self.multiplicity,
        }
        if self.faces is not None:
            data["faces"] = self.faces.tolist()
        if self.profile is not None:
            data["profile"] = self.profile.tolist()
            data["n_theta"] = self.n_theta
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Slice:
        """Build from the JSON description."""
        return cls(
            np.asarray(data["vertices"], dtype=float),
            None if data.get("faces") is None else np.asarray(data["faces"], dtype=int),
            BoundaryCondition(data.get("bc", "constrained")),
            int(data.get("multiplicity", 1)),
            None if data.get("profile") is None else np.asarray(data["profile"], dtype=float),
            int(data.get("n_theta", 0)),
        )


def trivial_slice(point: np.ndarray) -> Slice:
    """Return a point slice of mass zero."""
    return Slice(np.atleast_2d(np.asarray(point, dtype=float)), bc=BoundaryCondition.TRIVIAL)


def revolved_slice(profile: np.ndarray, n_theta: int, bc: BoundaryCondition, multiplicity: int = 1) -> Slice:
    """Revolve an (r, z) profile into an axisymmetric mesh slice."""
    vertices, faces = revolve_profile(profile, n_theta)
    return Slice(vertices, faces, bc, multiplicity, profile, n_theta)


# ---------------------------------------------------------------------------
# mass


def slice_atom_masses(domain: AmbientDomain, slice_: Slice) -> np.ndarray:
    """Return per-segment or per-face metric masses times multiplicity."""
    if slice_.is_trivial:
        return np.zeros(0)
    if slice_.vertices.shape[1] != domain.dim:
        raise DegenerateGeometry(
            f"Slice lives in R^{slice_.vertices.shape[1]} but the domain is {domain.dim}-D"
        )
    if slice_.is_mesh:
        masses = triangle_areas(slice_.vertices, slice_.faces)
    else:
        masses = polyline_segment_masses(slice_.vertices, domain.phi, closed=slice_.closed)
    return masses * slice_.multiplicity


def slice_mass(domain: AmbientDomain, slice_: Slice) -> float:
    """Return the metric length (2-D) or area (3-D) of a slice times multiplicity."""
    return float(np.sum(slice_atom_masses(domain, slice_)))


def slice_issues(domain: AmbientDomain, slice_: Slice) -> list[str]:
    """Return violated slice invariants (empty when the slice is valid)."""
    issues: list[str] = []
    if slice_.is_trivial:
        return issues
    tol = domain.tol_bdry
    inside = domain.contains(slice_.vertices)
    if not np.all(inside):
        issues.append(f"{int(np.sum(~inside))} vertices outside M")
    if slice_.is_mesh:
        scale = domain.diameter
        areas = triangle_areas(slice_.vertices, slice_.faces)
        if np.any(areas <= DEFAULT_FACE_AREA_MIN * scale**2):
            issues.append("degenerate faces")
    bnd = slice_.boundary_points()
    if slice_.bc == BoundaryCondition.CONSTRAINED:
        if domain.gamma.is_empty:
            issues.append("constrained slice in a domain without gamma")
        else:
            off = domain.gamma.distance(bnd)
            if len(off) and np.max(off) > tol:
                issues.append(f"boundary {np.max(off):.3e} away from gamma")
            for k, comp in enumerate(domain.gamma.components):
                if len(bnd) == 0 or np.min(comp.distance(bnd)) > tol:
                    issues.append(f"gamma component {k} not spanned")
    elif slice_.bc == BoundaryCondition.FREE and len(bnd):
        off = np.abs(domain.signed_distance(bnd))
        if np.max(off) > tol:
            issues.append(f"free boundary {np.max(off):.3e} away from the boundary of M")
    return issues


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True, eq=False)
class SweepoutFamily:
    """Lattice-indexed family of slices over P = [0, 1]^k, k <= 2."""

    slices: np.ndarray
    mode: str = CONSTRAINED

    def __post_init__(self) -> None:
        """Freeze the slice array."""
        source = self.slices
        arr = np.empty(np.shape(source), dtype=object)
        for index in np.ndindex(arr.shape):
            item = source
            for i in index:
                item = item[i]
            arr[index] = item
        if arr.ndim not in (1, 2):
            raise SweepoutError(f"Parameter dimension must be 1 or 2, got {arr.ndim}")
        arr.setflags(write=False)
        object.__setattr__(self, "slices", arr)
        if self.mode not in (CONSTRAINED, UNCONSTRAINED):
            raise SweepoutError(f"Unknown family mode {self.mode!r}")

    @classmethod
    def from_list(cls, slices: list[Slice], mode: str = CONSTRAINED) -> SweepoutFamily:
        """Build a k = 1 family from a list."""
        arr = np.empty(len(slices), dtype=object)
        for i, s in enumerate(slices):
            arr[i] = s
        return cls(arr, mode)

    @property
    def k(self) -> int:
        """Return the parameter dimension."""
        return self.slices.ndim

    @property
    def m_embed(self) -> int:
        """Return m with P embedded in [0, 1]^m."""
        return self.k

    @property
    def shape(self) -> tuple[int, ...]:
        """Return the lattice shape."""
        return self.slices.shape

    @property
    def size(self) -> int:
        """Return the number of slices."""
        return self.slices.size

    def __len__(self) -> int:
        return self.slices.shape[0]

    def __getitem__(self, index) -> Slice:
        return self.slices[index]

    def indices(self) -> Iterator[tuple[int, ...]]:
        """Iterate lattice indices in C order."""
        return np.ndindex(self.shape)

    def grid_step(self) -> np.ndarray:
        """Return the lattice spacing per axis."""
        return np.array([1.0 / max(n - 1, 1) for n in self.shape])

    def parameter(self, index: tuple[int, ...]) -> np.ndarray:
        """Return the parameter t in [0, 1]^k of a lattice index."""
        return np.asarray(index, dtype=float) * self.grid_step()

    def boundary_mask(self) -> np.ndarray:
        """Return True on lattice points of the boundary of P."""
        mask = np.zeros(self.shape, dtype=bool)
        for axis, n in enumerate(self.shape):
            lo = [slice(None)] * self.k
            hi = [slice(None)] * self.k
            lo[axis] = 0
            hi[axis] = n - 1
            mask[tuple(lo)] = True
            mask[tuple(hi)] = True
        return mask

    def lattice_distance_to_boundary(self) -> np.ndarray:
        """Return the sup-norm parameter distance of every lattice point to the boundary of P."""
        grids = np.meshgrid(*[np.linspace(0.0, 1.0, n) for n in self.shape], indexing="ij")
        dist = np.full(self.shape, np.inf)
        for g in grids:
            dist = np.minimum(dist, np.minimum(g, 1.0 - g))
        return dist

    def replace(self, updates: dict[tuple[int, ...], Slice]) -> SweepoutFamily:
        """Return a new family with some slices replaced."""
        arr = self.slices.copy()
        arr.setflags(write=True)
        for index, s in updates.items():
            arr[index] = s
        return SweepoutFamily(arr, self.mode)

    def masses(self, domain: AmbientDomain) -> np.ndarray:
        """Return the lattice array of slice masses."""
        flat = map_ordered(lambda s: slice_mass(domain, s), list(self.slices.ravel()))
        return np.asarray(flat, dtype=float).reshape(self.shape)

    def neighbour_pairs(self) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Iterate adjacent lattice pairs along every axis."""
        for index in self.indices():
            for axis in range(self.k):
                if index[axis] + 1 < self.shape[axis]:
                    other = list(index)
                    other[axis] += 1
                    yield index, tuple(other)

    def max_vertex_spacing(self) -> float:
        """Return the longest edge over all slices."""
        best = 0.0
        for s in self.slices.ravel():
            if not s.is_trivial:
                best = max(best, max_edge_length(s.vertices, s.faces))
        return best


@dataclass
class MinMaxReport:
    """Min-max value, boundary-max value and the mountain-pass condition."""

    m0: float
    bM0: float
    argmax_t: tuple[int, ...]
    argmax_param: list[float]
    gap: float
    passes_condition: bool
    strict_margin: float
    masses: np.ndarray = field(repr=False)
    refined_m0: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "m0": self.m0,
            "bM0": self.bM0,
            "argmax_t": list(self.argmax_t),
            "argmax_param": self.argmax_param,
            "gap": self.gap,
            "passes_condition": self.passes_condition,
            "strict_margin": self.strict_margin,
            "refined_m0": self.refined_m0,
        }


def minmax_report(
    domain: AmbientDomain,
    family: SweepoutFamily,
    strict_margin: float | None = None,
    refined: SweepoutFamily | None = None,
    masses: np.ndarray | None = None,
) -> MinMaxReport:
    """Scan the lattice for m0 (max mass) and bM0 (max over the boundary of P)."""
    if family.size == 0:
        raise EmptyFamily("Family has no slices")
    masses = family.masses(domain) if masses is None else masses
    flat = int(np.argmax(masses))
    argmax = tuple(int(i) for i in np.unravel_index(flat, family.shape))
    m0 = float(masses[argmax])
    bM0 = float(np.max(masses[family.boundary_mask()]))
    margin = DEFAULT_STRICT_MARGIN * m0 if strict_margin is None else strict_margin
    refined_m0 = None
    if refined is not None:
        refined_m0 = float(np.max(refined.masses(domain)))
    report = MinMaxReport(
        m0=m0,
        bM0=bM0,
        argmax_t=argmax,
        argmax_param=family.parameter(argmax).tolist(),
        gap=m0 - bM0,
        passes_condition=bool(m0 > bM0 + margin),
        strict_margin=margin,
        masses=masses,
        refined_m0=refined_m0,
    )
    _LOGGER.debug("Min-max scan: m0=%.9g bM0=%.9g at %s", m0, bM0, argmax)
    return report


# ---------------------------------------------------------------------------
# validation


@dataclass
class CheckResult:
    """Outcome of one family invariant."""

    passed: bool
    worst_value: float = 0.0
    worst_pair: tuple | None = None
    budget: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    """Per-invariant pass/fail of a family."""

    checks: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Return True when every check passed."""
        return all(c.passed for c in self.checks.values())

    @property
    def failures(self) -> list[str]:
        """Return the names of failed checks."""
        return [name for name, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            name: {
                "passed": c.passed,
                "worst_value": c.worst_value,
                "worst_pair": None if c.worst_pair is None else [list(p) for p in c.worst_pair],
                "budget": c.budget,
                "detail": c.detail,
            }
            for name, c in self.checks.items()
        }


def hausdorff(first: Slice, second: Slice) -> float:
    """Return the Hausdorff distance between the vertex sets of two slices."""
    a = first.vertices
    b = second.vertices
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def validate_family(
    domain: AmbientDomain,
    family: SweepoutFamily,
    continuity_budget: float | None = None,
    mass_continuity_budget: float | None = None,
) -> ValidationReport:
    """Check the discrete family axioms and report the worst offenders."""
    report = ValidationReport()
    if family.size == 0:
        report.checks["nonempty"] = CheckResult(False, detail="family has no slices")
        return report
    spacing = family.max_vertex_spacing()
    budget = DEFAULT_CONTINUITY_FACTOR * spacing if continuity_budget is None else continuity_budget
    masses = family.masses(domain)
    mass_budget = (
        DEFAULT_MASS_CONTINUITY * float(np.max(masses))
        if mass_continuity_budget is None
        else mass_continuity_budget
    )

    worst = (0.0, None)
    worst_mass = (0.0, None)
    for first, second in family.neighbour_pairs():
        dist = hausdorff(family[first], family[second])
        if dist > worst[0]:
            worst = (dist, (first, second))
        jump = abs(masses[first] - masses[second])
        if jump > worst_mass[0]:
            worst_mass = (jump, (first, second))
    report.checks["continuity"] = CheckResult(worst[0] <= budget, worst[0], worst[1], budget)
    report.checks["mass_continuity"] = CheckResult(
        worst_mass[0] <= mass_budget, worst_mass[0], worst_mass[1], mass_budget
    )

    modes = {s.bc for s in family.slices.ravel() if not s.is_trivial}
    report.checks["shared_bc"] = CheckResult(len(modes) <= 1, float(len(modes)), detail=",".join(sorted(m.value for m in modes)))

    bad = None
    count = 0
    for index in family.indices():
        s = family[index]
        issues = slice_issues(domain, s)
        if family.mode == CONSTRAINED and not s.is_trivial and s.bc != BoundaryCondition.CONSTRAINED:
            issues.append("slice is not constrained to gamma")
        if issues:
            count += 1
            if bad is None:
                bad = (index, "; ".join(issues))
    report.checks["slices"] = CheckResult(
        bad is None,
        float(count),
        None if bad is None else (bad[0], bad[0]),
        detail="" if bad is None else bad[1],
    )
    for name, check in report.checks.items():
        if not check.passed:
            _LOGGER.info("Family check %s failed: worst %.4g at %s %s", name, check.worst_value, check.worst_pair, check.detail)
    return report


# ---------------------------------------------------------------------------
# builders


def _chord_heights(n: int) -> np.ndarray:
    """Return cosine-clustered levels in [0, 1]."""
    t = np.linspace(0.0, 1.0, n)
    return 0.5 * (1.0 - np.cos(np.pi * t))


def _planar_chord(domain: AmbientDomain, direction: np.ndarray, level: float) -> tuple[np.ndarray, np.ndarray]:
    """Return the two boundary points on the line <x, direction> = level."""
    boundary = domain.boundary
    params, pts = boundary.samples(1024)
    values = pts @ direction - level
    crossings = []
    for i in range(len(params)):
        j = (i + 1) % len(params)
        if values[i] == 0.0:
            crossings.append(params[i])
        elif values[i] * values[j] < 0.0:
            lo = params[i]
            hi = params[j] if j else boundary.period
            crossings.append(
                optimize.brentq(lambda s: float(boundary.point(np.array([s]))[0] @ direction) - level, lo, hi, xtol=1e-15)
            )
    if len(crossings) < 2:
        raise SweepoutError(f"Level {level} does not cut the domain")
    ends = boundary.point(np.asarray(crossings[:2]))
    normal = np.array([-direction[1], direction[0]])
    order = np.argsort(ends @ normal)
    return ends[order[0]], ends[order[1]]


def build_level_set_sweepout(
    domain: AmbientDomain,
    sweep_axis: int = 0,
    resolution: int = DEFAULT_FAMILY_RESOLUTION,
    n_vertices: int = DEFAULT_POLYLINE_VERTICES,
    n_rings: int = 12,
    n_theta: int = 48,
) -> SweepoutFamily:
    """Sweep M by level sets of a linear height function (unconstrained, k = 1).

    The first and last slices are the extreme boundary points.
    """
    direction = np.eye(domain.dim)[sweep_axis]
    levels = _chord_heights(resolution)
    slices: list[Slice] = []
    if domain.mode == MODE_BODY_3D:
        axes = domain.boundary.semi_axes
        center = domain.boundary.center
        lo, hi = center[sweep_axis] - axes[sweep_axis], center[sweep_axis] + axes[sweep_axis]
        others = [i for i in range(3) if i != sweep_axis]
        for k, u in enumerate(levels):
            h = lo + (hi - lo) * u
            if k in (0, resolution - 1):
                point = center.copy()
                point[sweep_axis] = h
                slices.append(trivial_slice(point))
                continue
            rel = (h - center[sweep_axis]) / axes[sweep_axis]
            scale = np.sqrt(max(1.0 - rel * rel, 0.0))
            verts, faces = disk_mesh(1.0, 0.0, n_rings, n_theta)
            placed = np.empty_like(verts)
            placed[:, others[0]] = center[others[0]] + axes[others[0]] * scale * verts[:, 0]
            placed[:, others[1]] = center[others[1]] + axes[others[1]] * scale * verts[:, 1]
            placed[:, sweep_axis] = h
            slices.append(Slice(placed, faces, BoundaryCondition.FREE))
    else:
        _, pts = domain.boundary.samples(4096)
        heights = pts @ direction
        i_lo, i_hi = int(np.argmin(heights)), int(np.argmax(heights))
        lo, hi = heights[i_lo], heights[i_hi]
        for k, u in enumerate(levels):
            if k == 0:
                slices.append(trivial_slice(pts[i_lo]))
                continue
            if k == resolution - 1:
                slices.append(trivial_slice(pts[i_hi]))
                continue
            start, end = _planar_chord(domain, direction, lo + (hi - lo) * u)
            s = np.linspace(0.0, 1.0, n_vertices)[:, None]
            slices.append(Slice((1.0 - s) * start + s * end, bc=BoundaryCondition.FREE))
    _LOGGER.info("Built level-set sweepout with %d slices along axis %d", len(slices), sweep_axis)
    return SweepoutFamily.from_list(slices, UNCONSTRAINED)


def _segments_intersect(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Return True when some segment of polyline a crosses a segment of b."""
    p, r = a[:-1], np.diff(a, axis=0)
    q, s = b[:-1], np.diff(b, axis=0)
    rxs = r[:, None, 0] * s[None, :, 1] - r[:, None, 1] * s[None, :, 0]
    qp = q[None, :, :] - p[:, None, :]
    t_num = qp[..., 0] * s[None, :, 1] - qp[..., 1] * s[None, :, 0]
    u_num = qp[..., 0] * r[:, None, 1] - qp[..., 1] * r[:, None, 0]
    valid = np.abs(rxs) > 1e-300
    t = np.where(valid, t_num / np.where(valid, rxs, 1.0), -1.0)
    u = np.where(valid, u_num / np.where(valid, rxs, 1.0), -1.0)
    hit = valid & (t > tol) & (t < 1.0 - tol) & (u > tol) & (u < 1.0 - tol)
    return bool(np.any(hit))


def _same_boundary(domain: AmbientDomain, first: Slice, second: Slice) -> bool:
    tol = domain.tol_bdry
    a = first.boundary_points()
    b = second.boundary_points()
    if len(a) == 0 or len(b) == 0:
        return len(a) == len(b)
    da = np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2), axis=1)
    db = np.min(np.linalg.norm(b[:, None, :] - a[None, :, :], axis=2), axis=1)
    if max(np.max(da), np.max(db)) <= tol:
        return True
    if not domain.gamma.is_empty:
        return np.max(domain.gamma.distance(a)) <= tol and np.max(domain.gamma.distance(b)) <= tol
    return False


def _profile_for(slice_: Slice) -> np.ndarray:
    if slice_.profile is None:
        raise IncompatibleSlices("Mesh slices without a profile need identical connectivity")
    return slice_.profile


def _profiles_cross(first: np.ndarray, second: np.ndarray, tol: float) -> bool:
    return _segments_intersect(first, second, 1e-9) or bool(
        np.min(np.linalg.norm(first[1:-1, None, :] - second[None, 1:-1, :], axis=2)) <= tol
    )


def polyline_distance(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Return the Euclidean distance from points of shape (..., d) to a polyline."""
    start = polyline[:-1]
    seg = np.diff(polyline, axis=0)
    rel = points[..., None, :] - start
    u = np.clip(np.sum(rel * seg, axis=-1) / np.maximum(np.sum(seg**2, axis=1), 1e-300), 0.0, 1.0)
    return np.min(np.linalg.norm(rel - u[..., None] * seg, axis=-1), axis=-1)


def level_set_curves(
    first: np.ndarray,
    second: np.ndarray,
    t_values: np.ndarray,
    collar: float,
    tilt: float = DEFAULT_LEVEL_SET_TILT,
    bisections: int = 50,
) -> np.ndarray:
    """Return the curves at times t_values between two aligned curves with shared ends.

    Along every fibre first[i] -> second[i] the curve at time t sits on the
    level set {f = t} of f = d0 / (d0 + d1), d0 and d1 being the distances to
    the two curves, tilted by ``tilt`` times a fixed linear function. Within
    ``collar`` of the curve ends the fibre parameter blends into t itself,
    which is the fibrewise convex combination.
    """
    t_values = np.asarray(t_values, dtype=float)
    fibre = second - first
    scale = max(float(np.max(np.abs(np.vstack([first, second])))), 1e-300)
    # a fixed direction with no symmetry of its own
    direction = np.sqrt(np.arange(1, first.shape[1] + 1, dtype=float))
    direction /= np.linalg.norm(direction)

    def level(s):
        points = first + s[..., None] * fibre
        d0 = polyline_distance(points, first)
        d1 = polyline_distance(points, second)
        f = d0 / np.maximum(d0 + d1, 1e-300)
        return f + tilt * 4.0 * f * (1.0 - f) * (points @ direction) / scale

    lo = np.zeros((len(t_values), len(first)))
    hi = np.ones_like(lo)
    target = np.broadcast_to(t_values[:, None], lo.shape)
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        below = level(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    ends = first[[0, -1]]
    anchor = np.min(np.linalg.norm(first[:, None, :] - ends[None, :, :], axis=2), axis=1)
    weight = np.clip(anchor / max(collar, 1e-300), 0.0, 1.0)
    s = (1.0 - weight) * target + weight * 0.5 * (lo + hi)
    _LOGGER.debug("Level-set interpolation: mean fibre shift %.3e", float(np.mean(np.abs(s - target))))
    return first + s[..., None] * fibre


def build_connecting_sweepout(
    domain: AmbientDomain,
    sigma0: Slice,
    sigma1: Slice,
    resolution: int = 64,
    n_vertices: int = DEFAULT_POLYLINE_VERTICES,
    n_profile: int | None = None,
) -> SweepoutFamily:
    """Connect two slices sharing gamma by a k = 1 family.

    Interior slices follow the level sets of the distance ratio between the
    arclength-aligned inputs (their (r, z) profiles for axisymmetric meshes)
    in the bulk, and the fibrewise convex combination near gamma; see
    ``level_set_curves``. The end slices are the input objects themselves.
    """
    mode = CONSTRAINED if sigma0.bc == BoundaryCondition.CONSTRAINED else UNCONSTRAINED
    if sigma0 is sigma1 or (
        sigma0.vertices.shape == sigma1.vertices.shape
        and np.array_equal(sigma0.vertices, sigma1.vertices)
        and (sigma0.faces is None) == (sigma1.faces is None)
    ):
        return SweepoutFamily.from_list([sigma0] * resolution, mode)
    if sigma0.bc != sigma1.bc:
        raise IncompatibleSlices(f"Boundary conditions differ: {sigma0.bc.value} vs {sigma1.bc.value}")
    if not _same_boundary(domain, sigma0, sigma1):
        raise NoCommonBoundary("Slices do not share their boundary")
    tol = domain.tol_bdry
    collar = DEFAULT_FIBRE_COLLAR * domain.diameter
    t_values = np.linspace(0.0, 1.0, resolution)
    slices: list[Slice] = [sigma0]
    if sigma0.is_mesh != sigma1.is_mesh:
        raise IncompatibleSlices("Cannot connect a polyline to a mesh")
    if not sigma0.is_mesh:
        first = resample_polyline(np.asarray(sigma0.vertices), n_vertices)
        second = resample_polyline(np.asarray(sigma1.vertices), n_vertices)
        if np.linalg.norm(first[0] - second[0]) > np.linalg.norm(first[0] - second[-1]):
            second = second[::-1].copy()
        if _segments_intersect(first, second, 1e-9):
            raise NotDisjoint("Slices cross away from gamma")
        interior = np.linalg.norm(first[1:-1, None, :] - second[None, 1:-1, :], axis=2)
        if np.min(interior) <= tol:
            raise NotDisjoint("Slices touch away from gamma")
        for verts in level_set_curves(first, second, t_values[1:-1], collar):
            slices.append(Slice(verts, bc=sigma0.bc, multiplicity=sigma0.multiplicity))
    elif sigma0.profile is not None or sigma1.profile is not None:
        p0 = _profile_for(sigma0)
        p1 = _profile_for(sigma1)
        n_theta = sigma0.n_theta or sigma1.n_theta
        count = n_profile or max(len(p0), len(p1))
        first = resample_polyline(p0, count)
        second = resample_polyline(p1, count)
        if np.linalg.norm(first[0] - second[0]) > np.linalg.norm(first[0] - second[-1]):
            second = second[::-1].copy()
        if _profiles_cross(first, second, tol):
            raise NotDisjoint("Profiles cross away from gamma")
        for profile in level_set_curves(first, second, t_values[1:-1], collar):
            slices.append(revolved_slice(profile, n_theta, sigma0.bc, sigma0.multiplicity))
    else:
        if sigma0.faces.shape != sigma1.faces.shape or not np.array_equal(sigma0.faces, sigma1.faces):
            raise IncompatibleSlices("Meshes have different connectivity")
        for t in t_values[1:-1]:
            verts = (1.0 - t) * sigma0.vertices + t * sigma1.vertices
            slices.append(sigma0.with_vertices(verts))
    slices.append(sigma1)
    _LOGGER.info("Built connecting sweepout with %d slices", len(slices))
    return SweepoutFamily.from_list(slices, mode)
