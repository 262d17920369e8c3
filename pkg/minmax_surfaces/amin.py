"""Almost-minimizing certification and the freezing splice."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Any, Sequence
import warnings

import numpy as np
from scipy import optimize

from .ambient import AmbientDomain
from .comb import AbstractOpenSet, Annulus, Ball, ComplementBall, make_annulus_tuple, open_set_from_dict
from .const import (
    DEFAULT_AM_STARTS,
    DEFAULT_AM_STEPS,
    DEFAULT_SEED,
    HAIRPIN_CANDIDATES,
    NECK_PINCH,
    POLE_TOL,
    SURGERY_SAMPLES,
)
from .exceptions import (
    AlmostMinimizingError,
    BudgetTooSmall,
    EstimateViolated,
    NotGraphical,
)
from .geometry import max_edge_length, polyline_normals, vertex_normals
from .parallel import map_ordered
from .sweepout import Slice, SweepoutFamily, slice_mass
from .tighten import mass_gradient

_LOGGER = logging.getLogger(__name__)


class AMVerdict(str, Enum):
    """Outcome of an almost-minimizing query."""

    AM_CERTIFIED = "am_certified"
    COUNTEREXAMPLE = "counterexample"


@dataclass
class SearchBudget:
    """Deformation steps per start, number of starts and RNG seed."""

    steps: int = DEFAULT_AM_STEPS
    starts: int = DEFAULT_AM_STARTS
    seed: int = DEFAULT_SEED


@dataclass
class AMQuery:
    """Is ``slice`` eps-almost minimizing in ``region``?"""

    slice: Slice
    region: AbstractOpenSet
    eps: float
    m: int = 1
    budget: SearchBudget = field(default_factory=SearchBudget)

    def __post_init__(self) -> None:
        """Check eps."""
        if not self.eps > 0.0:
            raise AlmostMinimizingError(f"eps must be positive, got {self.eps}")

    @property
    def barrier_gap(self) -> float:
        """Return eps / 2^(m + 2)."""
        return self.eps / 2 ** (self.m + 2)


@dataclass
class AMCertificate:
    """Verdict of an almost-minimizing search.

    AM_CERTIFIED is one-sided: the budgeted search found no admissible
    deformation losing eps inside the region.
    """

    verdict: AMVerdict
    base_mass: float
    eps: float
    m: int
    family: list[Slice] | None = None
    masses: list[float] = field(default_factory=list)
    stats: dict[str, Any] = field(default_factory=dict)
    radii: dict[tuple[float, ...], float] = field(default_factory=dict)
    surgeries: tuple[str, ...] = ("vertex_flow",)

    @property
    def is_counterexample(self) -> bool:
        """Return True when a witness family is stored."""
        return self.verdict == AMVerdict.COUNTEREXAMPLE

    def replay(self, eps: float | None = None) -> bool:
        """Re-check the stored masses against eps (default: the query eps)."""
        if not self.is_counterexample or not self.masses:
            return False
        eps = self.eps if eps is None else eps
        barrier = self.base_mass + eps / 2 ** (self.m + 2)
        return (
            self.masses[0] == self.base_mass
            and all(m <= barrier for m in self.masses)
            and self.masses[-1] <= self.base_mass - eps
        )

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form including the witness family."""
        return {
            "verdict": self.verdict.value,
            "base_mass": self.base_mass,
            "eps": self.eps,
            "m": self.m,
            "masses": list(self.masses),
            "family": None if self.family is None else [s.to_dict() for s in self.family],
            "stats": self.stats,
            "radii": [{"point": list(k), "radius": v} for k, v in self.radii.items()],
            "surgeries": list(self.surgeries),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AMCertificate:
        """Rebuild a stored certificate."""
        family = data.get("family")
        return cls(
            verdict=AMVerdict(data["verdict"]),
            base_mass=float(data["base_mass"]),
            eps=float(data["eps"]),
            m=int(data["m"]),
            family=None if family is None else [Slice.from_dict(s) for s in family],
            masses=[float(v) for v in data.get("masses", [])],
            stats=dict(data.get("stats", {})),
            radii={tuple(item["point"]): float(item["radius"]) for item in data.get("radii", [])},
            surgeries=tuple(data.get("surgeries", ("vertex_flow",))),
        )


# ---------------------------------------------------------------------------
# search


def movable_vertices(domain: AmbientDomain, slice_: Slice, region: AbstractOpenSet) -> np.ndarray:
    """Return a mask of vertices free to move: inside the region, off gamma, off the wall."""
    vertices = slice_.vertices
    mask = region.contains(vertices)
    mask[slice_.boundary_indices()] = False
    if not domain.gamma.is_empty:
        mask &= domain.gamma.distance(vertices) > domain.tol_bdry
    mask &= domain.signed_distance(vertices) > domain.tol_bdry
    return mask


def _smooth_bump(domain: AmbientDomain, slice_: Slice, movable: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Return a random normal displacement supported on movable vertices."""
    vertices = slice_.vertices
    if slice_.is_mesh:
        normals = vertex_normals(vertices, slice_.faces)
    else:
        normals = polyline_normals(vertices)
    idx = np.nonzero(movable)[0]
    width = max(3.0 * max_edge_length(vertices, slice_.faces), 1e-12)
    weights = np.zeros(len(vertices))
    for _ in range(3):
        center = vertices[rng.choice(idx)]
        dist = np.linalg.norm(vertices - center, axis=1)
        weights += rng.normal() * np.exp(-0.5 * (dist / (4.0 * width)) ** 2)
    weights[~movable] = 0.0
    return weights[:, None] * normals


def _perturbed_start(
    domain: AmbientDomain, slice_: Slice, movable: np.ndarray, base: float, cap: float, rng: np.random.Generator
) -> list[Slice]:
    """Return a short path from the slice to a random nearby start below the cap."""
    bump = _smooth_bump(domain, slice_, movable, rng)
    peak = float(np.max(np.abs(bump))) if bump.size else 0.0
    if peak == 0.0:
        return [slice_]
    amplitude = 0.1 * domain.diameter / peak
    for _ in range(40):
        path = [slice_.with_vertices(slice_.vertices + s * amplitude * bump) for s in np.linspace(0.0, 1.0, 5)]
        ok = all(np.all(domain.contains(p.vertices)) for p in path)
        if ok and all(slice_mass(domain, p) <= base + 0.5 * (cap - base) for p in path):
            return path
        amplitude *= 0.5
    return [slice_]


def _descend(
    domain: AmbientDomain, start: Slice, movable: np.ndarray, target: float, steps: int
) -> tuple[list[Slice], bool]:
    """L-BFGS descent on the movable vertices; returns the recorded path and convergence."""
    base_vertices = np.array(start.vertices)
    dim = base_vertices.shape[1]
    count = int(movable.sum())

    def unpack(x):
        vertices = base_vertices.copy()
        vertices[movable] = x.reshape(count, dim)
        return vertices

    def fun(x):
        s = start.with_vertices(unpack(x))
        return slice_mass(domain, s), mass_gradient(domain, s)[movable].ravel()

    path: list[np.ndarray] = []

    class _Reached(Exception):
        pass

    def record(x):
        path.append(np.array(x))
        if fun(x)[0] <= target:
            raise _Reached

    converged = True
    try:
        res = optimize.minimize(
            fun,
            base_vertices[movable].ravel(),
            jac=True,
            method="L-BFGS-B",
            callback=record,
            options={"maxiter": steps, "gtol": 1e-10, "ftol": 1e-14},
        )
        converged = res.status == 0
    except _Reached:
        pass
    slices = [start.with_vertices(unpack(x)) for x in path]
    inside = []
    for s in slices:
        if not np.all(domain.contains(s.vertices)):
            break
        inside.append(s)
    return inside, converged


def hairpin_path(
    domain: AmbientDomain, slice_: Slice, movable: np.ndarray, region: AbstractOpenSet, samples: int = SURGERY_SAMPLES
) -> list[Slice] | None:
    """Return a path pulling a movable sub-arc onto its chord, largest length saving first.

    Only open polylines qualify; the moved vertices must end inside the region.
    """
    if slice_.is_mesh or slice_.is_trivial or slice_.closed:
        return None
    vertices = slice_.vertices
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(vertices, axis=0), axis=1))])
    first, last = np.triu_indices(len(vertices), k=2)
    # every vertex strictly between the two ends must be movable
    blocked = np.concatenate([[0], np.cumsum(~movable)])
    keep = blocked[last] == blocked[first + 1]
    first, last = first[keep], last[keep]
    saving = arc[last] - arc[first] - np.linalg.norm(vertices[last] - vertices[first], axis=1)
    for k in np.argsort(-saving)[:HAIRPIN_CANDIDATES]:
        if saving[k] <= 1e-9 * arc[-1]:
            break
        a, b = int(first[k]), int(last[k])
        frac = (arc[a + 1 : b] - arc[a]) / (arc[b] - arc[a])
        target = vertices[a] + frac[:, None] * (vertices[b] - vertices[a])
        if not (np.all(region.contains(target)) and np.all(domain.contains(target))):
            continue
        path = []
        for s in np.linspace(0.0, 1.0, samples):
            moved = vertices.copy()
            moved[a + 1 : b] = (1.0 - s) * vertices[a + 1 : b] + s * target
            path.append(slice_.with_vertices(moved))
        _LOGGER.debug("Hairpin %d..%d saves %.4g", a, b, saving[k])
        return path
    return None


def neck_path(
    domain: AmbientDomain, slice_: Slice, movable: np.ndarray, region: AbstractOpenSet, samples: int = SURGERY_SAMPLES
) -> list[Slice] | None:
    """Return a path pinching the narrowest movable ring of a revolved slice toward the axis."""
    if not slice_.is_mesh or slice_.profile is None:
        return None
    profile = slice_.profile
    sizes = np.where(profile[:, 0] <= POLE_TOL, 1, slice_.n_theta)
    if int(sizes.sum()) != len(slice_.vertices):
        return None
    ring = np.repeat(np.arange(len(profile)), sizes)
    ring_movable = np.array([bool(np.all(movable[ring == q])) for q in range(len(profile))])
    candidates = np.nonzero(ring_movable & (profile[:, 0] > POLE_TOL))[0]
    if len(candidates) == 0:
        return None
    neck = int(candidates[np.argmin(profile[candidates, 0])])
    lo = hi = neck
    while lo > 0 and ring_movable[lo - 1]:
        lo -= 1
    while hi < len(profile) - 1 and ring_movable[hi + 1]:
        hi += 1
    half = max(neck - lo, hi - neck) + 1
    weight = np.clip(1.0 - np.abs(np.arange(len(profile)) - neck) / half, 0.0, 1.0)
    weight[~ring_movable] = 0.0
    w = weight[ring]
    path = []
    for s in np.linspace(0.0, NECK_PINCH, samples):
        moved = np.array(slice_.vertices)
        moved[:, :2] *= (1.0 - s * w)[:, None]
        path.append(slice_.with_vertices(moved))
    end = path[-1].vertices[w > 0.0]
    if not (np.all(region.contains(end)) and np.all(domain.contains(end))):
        return None
    _LOGGER.debug("Neck pinch at ring %d (r = %.4g)", neck, profile[neck, 0])
    return path


SURGERIES = {"hairpin": hairpin_path, "neck": neck_path}


def _verify(domain: AmbientDomain, query: AMQuery, family: list[Slice]) -> tuple[bool, list[float]]:
    base = query.slice
    outside = ~query.region.contains(base.vertices)
    masses = [slice_mass(domain, s) for s in family]
    base_mass = masses[0]
    for s in family:
        if s.vertices.shape != base.vertices.shape or not np.array_equal(s.vertices[outside], base.vertices[outside]):
            return False, masses
    ok = all(m <= base_mass + query.barrier_gap for m in masses) and masses[-1] <= base_mass - query.eps
    return ok, masses


def is_eps_almost_minimizing(domain: AmbientDomain, query: AMQuery) -> AMCertificate:
    """Search for a deformation inside the region that loses eps below a barrier.

    Greedy descent runs from the slice and from perturbed starts; a found
    family is re-checked from stored masses before it is reported.
    """
    slice_ = query.slice
    base = slice_mass(domain, slice_)
    cap = base + query.barrier_gap
    target = base - query.eps
    stats: dict[str, Any] = {"starts": 0, "best_mass": base, "budget_exhausted": False}
    if slice_.is_trivial:
        return AMCertificate(AMVerdict.AM_CERTIFIED, base, query.eps, query.m, stats=stats)
    movable = movable_vertices(domain, slice_, query.region)
    if not np.any(movable):
        _LOGGER.debug("No movable vertices inside the region")
        return AMCertificate(AMVerdict.AM_CERTIFIED, base, query.eps, query.m, stats=stats)

    seeds = np.random.SeedSequence(query.budget.seed).spawn(max(query.budget.starts, 1))

    def run(k: int):
        if k == 0:
            lead = [slice_]
        else:
            lead = _perturbed_start(domain, slice_, movable, base, cap, np.random.default_rng(seeds[k]))
        path, converged = _descend(domain, lead[-1], movable, target, query.budget.steps)
        return lead + path, converged

    def witness(family: list[Slice]) -> tuple[list[Slice], list[float]] | None:
        masses = [slice_mass(domain, s) for s in family]
        stats["best_mass"] = min(stats["best_mass"], min(masses))
        if masses[-1] > target:
            return None
        # cut the path at the first slice reaching the target
        stop = next(i for i, m in enumerate(masses) if m <= target)
        ok, checked = _verify(domain, query, family[: stop + 1])
        return (family[: stop + 1], checked) if ok else None

    results = map_ordered(run, range(max(query.budget.starts, 1)))
    exhausted = False
    surgeries = ["vertex_flow"]
    for k, (family, converged) in enumerate(results):
        stats["starts"] += 1
        exhausted |= not converged
        found = witness(family)
        if found is not None:
            stats["start"] = k
            _LOGGER.info("Counterexample found from start %d: %.9g -> %.9g", k, base, found[1][-1])
            return AMCertificate(AMVerdict.COUNTEREXAMPLE, base, query.eps, query.m, *found, stats, surgeries=tuple(surgeries))

    for name, build in SURGERIES.items():
        lead = build(domain, slice_, movable, query.region)
        if lead is None:
            continue
        surgeries.append(name)
        path, converged = _descend(domain, lead[-1], movable, target, query.budget.steps)
        exhausted |= not converged
        found = witness(lead + path)
        if found is not None:
            stats["surgery"] = name
            _LOGGER.info("Counterexample found by %s surgery: %.9g -> %.9g", name, base, found[1][-1])
            return AMCertificate(AMVerdict.COUNTEREXAMPLE, base, query.eps, query.m, *found, stats, surgeries=tuple(surgeries))
    stats["budget_exhausted"] = exhausted
    if exhausted:
        warnings.warn(
            BudgetTooSmall(f"Search stopped on its budget of {query.budget.steps} steps before converging"),
            stacklevel=2,
        )
    return AMCertificate(AMVerdict.AM_CERTIFIED, base, query.eps, query.m, stats=stats, surgeries=tuple(surgeries))


@dataclass
class AnnulusCertificate:
    """Outcome of the a.m. search over an annulus tuple around a point."""

    point: np.ndarray
    certified: bool
    radius: float | None
    certificates: list[AMCertificate]
    regions: list[AbstractOpenSet]

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "point": self.point.tolist(),
            "certified": self.certified,
            "radius": self.radius,
            "regions": [r.to_dict() for r in self.regions],
            "verdicts": [c.verdict.value for c in self.certificates],
        }


def is_eps_almost_minimizing_in_annuli(
    domain: AmbientDomain,
    slice_: Slice,
    x: np.ndarray,
    radii: Sequence[float],
    eps: float,
    m: int = 1,
    budget: SearchBudget | None = None,
) -> AnnulusCertificate:
    """Certify x when the slice is eps-a.m. in at least one set of its annulus tuple.

    The certified radius is the outer radius r_1 of the tuple.
    """
    x = np.asarray(x, dtype=float)
    regions = make_annulus_tuple(domain, x, radii).sets
    budget = budget or SearchBudget()
    certificates = []
    for region in regions:
        cert = is_eps_almost_minimizing(domain, AMQuery(slice_, region, eps, m, budget))
        certificates.append(cert)
        if not cert.is_counterexample:
            radius = float(radii[0])
            cert.radii[tuple(x.tolist())] = radius
            return AnnulusCertificate(x, True, radius, certificates, regions)
    return AnnulusCertificate(x, False, None, certificates, regions)


# ---------------------------------------------------------------------------
# freezing splice


@dataclass
class FreezeReport:
    """Measured freezing inequalities of a splice."""

    t0: tuple[int, ...]
    a: float
    a_prime: float
    a_double_prime: float
    eta: float
    eps: float
    p: int
    retries: int
    modified: list[tuple[int, ...]]
    max_increase: float
    increase_bound: float
    min_decrease_inner: float
    decrease_bound: float
    outside_identical: bool

    @property
    def passed(self) -> bool:
        """Return True when all three inequalities hold."""
        return (
            self.outside_identical
            and self.max_increase <= self.increase_bound
            and self.min_decrease_inner >= self.decrease_bound
        )

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "t0": list(self.t0),
            "a": self.a,
            "a_prime": self.a_prime,
            "a_double_prime": self.a_double_prime,
            "eta": self.eta,
            "eps": self.eps,
            "p": self.p,
            "retries": self.retries,
            "modified": [list(t) for t in self.modified],
            "max_increase": self.max_increase,
            "increase_bound": self.increase_bound,
            "min_decrease_inner": self.min_decrease_inner,
            "decrease_bound": self.decrease_bound,
            "outside_identical": self.outside_identical,
            "passed": self.passed,
        }


def smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep on [0, 1], C2 at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (x * (6.0 * x - 15.0) + 10.0)


def _lattice_cutoff(distance: np.ndarray, a_prime: float, a_double_prime: float) -> np.ndarray:
    """Return 1 for distance <= a', 0 for distance >= a'', smooth in between."""
    span = max(a_double_prime - a_prime, 1e-12)
    return 1.0 - smoothstep((np.asarray(distance, dtype=float) - a_prime) / span)


def _deformation_at(deformation: Sequence[Slice], sigma: float) -> np.ndarray:
    """Interpolate the deformation vertices at parameter sigma in [0, 1]."""
    pos = sigma * (len(deformation) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(deformation) - 1)
    w = pos - lo
    return (1.0 - w) * deformation[lo].vertices + w * deformation[hi].vertices


def _spatial_cutoff(points: np.ndarray, inner: AbstractOpenSet, outer: AbstractOpenSet) -> np.ndarray:
    """Return 1 on the inner set, 0 off the outer set, smooth across the collar."""
    d_in = inner.point_distance(points)
    d_out = _distance_to_outside(points, outer)
    ratio = d_in / np.maximum(d_in + d_out, 1e-300)
    weight = 1.0 - smoothstep(ratio)
    weight[d_in == 0.0] = 1.0
    weight[~outer.contains(points)] = 0.0
    return weight


def _distance_to_outside(points: np.ndarray, region: AbstractOpenSet) -> np.ndarray:
    """Return the distance of points inside a region to its complement (0 outside)."""
    points = np.atleast_2d(points)
    d = np.linalg.norm(points - region.center, axis=1)
    lo, hi = region.radial_interval()
    inside = region.contains(points)
    if lo == 0.0:
        lo = -np.inf
    return np.where(inside, np.minimum(d - lo, hi - d), 0.0)


def freeze_splice(
    domain: AmbientDomain,
    family: SweepoutFamily,
    t0: tuple[int, ...],
    deformation: Sequence[Slice],
    region: AbstractOpenSet,
    outer_region: AbstractOpenSet,
    eps: float,
    a: int = 2,
    eta: float | None = None,
) -> tuple[SweepoutFamily, FreezeReport]:
    """Splice an area-decreasing deformation of one slice into its lattice neighbourhood.

    ``a`` is the lattice half-width of the cube Q(t0, a); the deformation is
    applied fully on Q(t0, a/2) and faded out by a quintic cutoff before
    3a/4. Neighbours must share the slice connectivity and stay within
    ``eta`` of it inside the outer region; the cube is halved otherwise.
    """
    t0 = tuple(int(i) for i in t0)
    center = family[t0]
    deformation = list(deformation)
    if not deformation:
        raise AlmostMinimizingError("Deformation is empty")
    for s in deformation:
        if s.vertices.shape != center.vertices.shape:
            raise NotGraphical("Deformation slices do not share the vertex layout of the frozen slice")
    p = family.k
    eta = 4.0 * max(max_edge_length(center.vertices, center.faces), 1e-12) if eta is None else eta
    boundary_mask = family.boundary_mask()
    masses = family.masses(domain)
    increase_bound = eps / 2 ** (p + 1)
    decrease_bound = eps / 2.0
    base_disp = deformation[0].vertices - center.vertices
    weight = _spatial_cutoff(center.vertices, region, outer_region)[:, None]
    inside_outer = outer_region.contains(center.vertices)

    retries = 0
    a_current = int(a)
    while True:
        if a_current < 2:
            raise EstimateViolated("Freezing estimates fail down to a = 2")
        a_prime = a_current / 2.0
        a_double_prime = 3.0 * a_current / 4.0
        cube = []
        graph_ok = True
        for index in family.indices():
            dist = max(abs(i - j) for i, j in zip(index, t0))
            if dist > a_current or boundary_mask[index]:
                continue
            other = family[index]
            if other.vertices.shape != center.vertices.shape or (
                center.is_mesh and not np.array_equal(other.faces, center.faces)
            ):
                graph_ok = False
                break
            offset = np.linalg.norm(other.vertices - center.vertices, axis=1)
            if np.any(offset[inside_outer] > eta):
                graph_ok = False
                break
            cube.append((index, dist))
        if not graph_ok:
            if a_current == 2:
                raise NotGraphical(f"Neighbours of {t0} are not graphs over it within eta={eta:.3g}")
            _LOGGER.warning("Neighbours of %s are not graphical at a=%d, halving", t0, a_current)
            a_current //= 2
            retries += 1
            continue

        updates: dict[tuple[int, ...], Slice] = {}
        for index, dist in cube:
            sigma = float(_lattice_cutoff(dist, a_prime, a_double_prime))
            if sigma <= 0.0:
                continue
            disp = _deformation_at(deformation, sigma) - center.vertices - base_disp
            other = family[index]
            vertices = other.vertices + weight * disp
            updates[index] = other.with_vertices(vertices, keep_profile=False)
        spliced = family.replace(updates)

        new_masses = masses.copy()
        for index, s in updates.items():
            new_masses[index] = slice_mass(domain, s)
        diff = new_masses - masses
        inner = [index for index, dist in cube if dist <= a_prime]
        max_increase = float(np.max(diff))
        min_decrease = float(min(-diff[index] for index in inner)) if inner else np.inf
        outside_identical = all(
            spliced[index] is family[index]
            for index in family.indices()
            if max(abs(i - j) for i, j in zip(index, t0)) > a_current
        )
        report = FreezeReport(
            t0, float(a_current), a_prime, a_double_prime, float(eta), float(eps), p, retries,
            sorted(updates), max_increase, increase_bound, min_decrease, decrease_bound, outside_identical,
        )
        if report.passed:
            _LOGGER.info(
                "Splice at %s with a=%d: max increase %.3g, inner decrease %.3g",
                t0, a_current, max_increase, min_decrease,
            )
            return spliced, report
        _LOGGER.warning(
            "Freezing estimates failed at a=%d (increase %.3g > %.3g or decrease %.3g < %.3g), retrying",
            a_current, max_increase, increase_bound, min_decrease, decrease_bound,
        )
        if a_current == 2:
            raise EstimateViolated(
                f"Freezing estimates fail at a=2: increase {max_increase:.3g}, decrease {min_decrease:.3g}"
            )
        a_current //= 2
        retries += 1


def region_from_dict(data: dict[str, Any]) -> AbstractOpenSet:
    """Build a search region from its JSON descriptor."""
    return open_set_from_dict(data)


def enlarged_region(region: AbstractOpenSet, factor: float = 1.5) -> AbstractOpenSet:
    """Return a concentric set containing the closure of ``region``."""
    if isinstance(region, Annulus):
        return Annulus(region.center, region.inner / factor, region.outer * factor)
    if isinstance(region, ComplementBall):
        return ComplementBall(region.center, region.radius / factor, region.extent)
    if isinstance(region, Ball):
        return Ball(region.center, region.radius * factor)
    raise AlmostMinimizingError(f"Cannot enlarge a {region.kind} region")
