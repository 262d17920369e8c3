"""Combinatorial lemma, CO-tuples, annulus tuples and the refined cube covering."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
import logging
from typing import Any, Callable, Sequence

import numpy as np

from .ambient import AmbientDomain
from .const import (
    DEFAULT_DISTANCE_ZERO,
    DELTA_FACTOR,
    ETA_TILDE_FACTOR,
    RADIUS_RATIO,
    REFINED_HALF_SIDE,
    REFINED_OFFSET,
    omega,
)
from .exceptions import (
    AssignmentConflict,
    CombinatorialError,
    CoverageGap,
    HypothesisViolated,
    RadiiTooClose,
    TooFewSets,
)

_LOGGER = logging.getLogger(__name__)

_SAMPLES = 256


# ---------------------------------------------------------------------------
# open sets


class AbstractOpenSet:
    """Open subset of R^d described in closed form."""

    kind = "abstract"

    center: np.ndarray

    def diameter(self) -> float:
        """Return the Euclidean diameter."""
        raise NotImplementedError

    def point_distance(self, points: np.ndarray) -> np.ndarray:
        """Return the distance of points to the closure of the set."""
        raise NotImplementedError

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Return a mask of points inside the open set."""
        raise NotImplementedError

    def radial_interval(self) -> tuple[float, float]:
        """Return the closed range of |x - center| covered by the closure."""
        raise NotImplementedError

    def boundary_samples(self, n: int) -> np.ndarray:
        """Return points on the topological boundary."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON descriptor."""
        raise NotImplementedError

    def dist(self, other: AbstractOpenSet) -> float:
        """Return the distance between the closures of two sets."""
        return set_distance(self, other)

    @property
    def dim(self) -> int:
        """Return the ambient dimension."""
        return len(self.center)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


def _sphere_samples(center: np.ndarray, radius: float, n: int) -> np.ndarray:
    dim = len(center)
    if radius <= 0.0:
        return center[None, :]
    if dim == 1:
        return np.array([[center[0] - radius], [center[0] + radius]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        return center + radius * np.column_stack([np.cos(theta), np.sin(theta)])
    # Fibonacci sphere
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z * z)
    theta = np.pi * (1.0 + 5.0**0.5) * k
    return center + radius * np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


class Ball(AbstractOpenSet):
    """Open ball B_r(c)."""

    kind = "ball"

    def __init__(self, center, radius: float) -> None:
        """Initialize the ball."""
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius <= 0.0:
            raise CombinatorialError(f"Ball radius must be positive, got {radius}")

    def diameter(self) -> float:
        return 2.0 * self.radius

    def point_distance(self, points):
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return np.maximum(d - self.radius, 0.0)

    def contains(self, points):
        return np.linalg.norm(np.atleast_2d(points) - self.center, axis=1) < self.radius

    def radial_interval(self):
        return 0.0, self.radius

    def boundary_samples(self, n):
        return _sphere_samples(self.center, self.radius, n)

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class Interval(Ball):
    """Open interval (a, b) of the real line."""

    kind = "interval"

    def __init__(self, lo: float, hi: float) -> None:
        """Initialize the interval."""
        if not hi > lo:
            raise CombinatorialError(f"Interval needs lo < hi, got ({lo}, {hi})")
        self.lo = float(lo)
        self.hi = float(hi)
        super().__init__([0.5 * (lo + hi)], 0.5 * (hi - lo))

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


class Annulus(AbstractOpenSet):
    """Open annulus B_t(c) minus the closed ball of radius tau."""

    kind = "annulus"

    def __init__(self, center, inner: float, outer: float) -> None:
        """Initialize the annulus, requires 0 < inner < outer."""
        if not 0.0 < inner < outer:
            raise CombinatorialError(f"Annulus needs 0 < inner < outer, got ({inner}, {outer})")
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.inner = float(inner)
        self.outer = float(outer)

    def diameter(self) -> float:
        return 2.0 * self.outer

    def point_distance(self, points):
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return np.maximum.reduce([self.inner - d, d - self.outer, np.zeros_like(d)])

    def contains(self, points):
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return (d > self.inner) & (d < self.outer)

    def radial_interval(self):
        return self.inner, self.outer

    def boundary_samples(self, n):
        return np.vstack([
            _sphere_samples(self.center, self.inner, n),
            _sphere_samples(self.center, self.outer, n),
        ])

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "inner": self.inner, "outer": self.outer}


class ComplementBall(AbstractOpenSet):
    """M minus the closed ball of radius r; ``extent`` bounds its diameter."""

    kind = "complement_ball"

    def __init__(self, center, radius: float, extent: float = np.inf) -> None:
        """Initialize the complement."""
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        self.extent = float(extent)

    def diameter(self) -> float:
        return self.extent

    def point_distance(self, points):
        d = np.linalg.norm(np.atleast_2d(points) - self.center, axis=1)
        return np.maximum(self.radius - d, 0.0)

    def contains(self, points):
        return np.linalg.norm(np.atleast_2d(points) - self.center, axis=1) > self.radius

    def radial_interval(self):
        return self.radius, np.inf

    def boundary_samples(self, n):
        return _sphere_samples(self.center, self.radius, n)

    def to_dict(self):
        data = {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}
        if np.isfinite(self.extent):
            data["extent"] = self.extent
        return data


def open_set_from_dict(data: dict[str, Any]) -> AbstractOpenSet:
    """Build an open set from its JSON descriptor."""
    kind = data.get("kind")
    if kind == "ball":
        return Ball(data["center"], data["radius"])
    if kind == "interval":
        return Interval(data["lo"], data["hi"])
    if kind == "annulus":
        return Annulus(data["center"], data["inner"], data["outer"])
    if kind == "complement_ball":
        return ComplementBall(data["center"], data["radius"], data.get("extent", np.inf))
    raise CombinatorialError(f"Unknown open set kind {kind!r}")


def _radial_gap(first: tuple[float, float], second: tuple[float, float]) -> float:
    return max(0.0, second[0] - first[1], first[0] - second[1])


def set_distance(first: AbstractOpenSet, second: AbstractOpenSet) -> float:
    """Return dist(first, second) between closures.

    Concentric pairs and pairs involving a ball are exact; other pairs are
    evaluated on boundary samples and confirmed at ten times the density.
    """
    if first.dim != second.dim:
        raise CombinatorialError("Open sets live in different dimensions")
    offset = float(np.linalg.norm(first.center - second.center))
    if offset == 0.0:
        return _radial_gap(first.radial_interval(), second.radial_interval())
    for ball, other in ((first, second), (second, first)):
        if isinstance(ball, Ball):
            lo, hi = other.radial_interval()
            reach = (max(0.0, offset - ball.radius), offset + ball.radius)
            return _radial_gap(reach, (lo, hi))
    if isinstance(first, ComplementBall) and isinstance(second, ComplementBall):
        return 0.0
    coarse = _sampled_distance(first, second, _SAMPLES)
    fine = _sampled_distance(first, second, 10 * _SAMPLES)
    return min(coarse, fine)


def _sampled_distance(first: AbstractOpenSet, second: AbstractOpenSet, n: int) -> float:
    # closures meet iff a boundary point of one lies in the closure of the other
    # or one contains the other
    a = first.boundary_samples(n)
    b = second.boundary_samples(n)
    best = min(float(np.min(second.point_distance(a))), float(np.min(first.point_distance(b))))
    return max(best, 0.0)


def _zero_tol(sets: Sequence[AbstractOpenSet]) -> float:
    finite = [s.diameter() for s in sets if np.isfinite(s.diameter())]
    scale = max(finite) if finite else 1.0
    return DEFAULT_DISTANCE_ZERO * max(scale, 1e-300)


@dataclass
class COTuple:
    """Tuple of open sets with pairwise dist >= 4 * min diam."""

    sets: list[AbstractOpenSet]

    def violations(self, rel_tol: float = 1e-12) -> list[tuple[int, int]]:
        """Return index pairs breaking the separation condition."""
        bad = []
        for i, j in combinations(range(len(self.sets)), 2):
            first, second = self.sets[i], self.sets[j]
            bound = 4.0 * min(first.diameter(), second.diameter())
            if first.dist(second) < bound * (1.0 - rel_tol):
                bad.append((i, j))
        return bad

    @property
    def is_valid(self) -> bool:
        """Return True when every pair is separated."""
        return not self.violations()

    def __len__(self) -> int:
        return len(self.sets)

    def to_dict(self) -> list[dict[str, Any]]:
        """Return the JSON descriptor list."""
        return [s.to_dict() for s in self.sets]


# ---------------------------------------------------------------------------
# combinatorial lemma


def check_family_hypothesis(families: Sequence[Sequence[AbstractOpenSet]], rel_tol: float = 1e-12) -> None:
    """Raise HypothesisViolated unless dist >= 2 * min diam inside every family."""
    for f, family in enumerate(families):
        for j, k in combinations(range(len(family)), 2):
            bound = 2.0 * min(family[j].diameter(), family[k].diameter())
            if family[j].dist(family[k]) < bound * (1.0 - rel_tol):
                raise HypothesisViolated(
                    f, (j, k), f"Family {f}: sets {j} and {k} are closer than twice the smaller diameter"
                )


def extract_subfamilies(
    families: Sequence[Sequence[AbstractOpenSet]], p: int
) -> list[list[AbstractOpenSet]]:
    """Select at least 2^p sets per family with all cross-family distances positive.

    Sets are scanned in ascending diameter (stable on input order); each fixed
    set removes the later sets touching it, and a family is cleared once it
    holds 2^p fixed sets.
    """
    need = 2**p
    if len(families) > need:
        raise CombinatorialError(f"At most {need} families allowed for p={p}, got {len(families)}")
    for f, family in enumerate(families):
        if len(family) < omega(p):
            raise TooFewSets(f"Family {f} has {len(family)} sets, needs {omega(p)}")
    check_family_hypothesis(families)
    everything = [s for family in families for s in family]
    zero = _zero_tol(everything)

    order = [(family[j].diameter(), f, j) for f, family in enumerate(families) for j in range(len(family))]
    order.sort(key=lambda item: item[0])
    removed = [False] * len(order)
    kept: dict[int, list[int]] = {f: [] for f in range(len(families))}
    for pos, (_, f, j) in enumerate(order):
        if removed[pos]:
            continue
        fixed = families[f][j]
        kept[f].append(j)
        clear = len(kept[f]) == need
        for later in range(pos + 1, len(order)):
            if removed[later]:
                continue
            _, g, k = order[later]
            if clear and g == f:
                removed[later] = True
            elif g != f and fixed.dist(families[g][k]) <= zero:
                removed[later] = True

    result = [[families[f][j] for j in sorted(kept[f])] for f in range(len(families))]
    for f, sub in enumerate(result):
        if len(sub) < need:
            raise CombinatorialError(f"Family {f} kept {len(sub)} sets, expected at least {need}")
    for f, g in combinations(range(len(result)), 2):
        for first in result[f]:
            for second in result[g]:
                if first.dist(second) <= zero:
                    raise CombinatorialError(f"Families {f} and {g} kept touching sets")
    _LOGGER.debug("Extracted subfamilies of sizes %s", [len(s) for s in result])
    return result


def brute_force_feasible(
    families: Sequence[Sequence[AbstractOpenSet]], p: int
) -> list[tuple[int, ...]] | None:
    """Return index choices of 2^p sets per family with positive cross distances, or None."""
    need = 2**p
    zero = _zero_tol([s for family in families for s in family])
    choices = [list(combinations(range(len(family)), need)) for family in families]
    chosen: list[tuple[int, ...]] = []

    def compatible(f: int, pick: tuple[int, ...]) -> bool:
        for g, other in enumerate(chosen):
            for j in pick:
                for k in other:
                    if families[f][j].dist(families[g][k]) <= zero:
                        return False
        return True

    def search(f: int) -> bool:
        if f == len(families):
            return True
        for pick in choices[f]:
            if compatible(f, pick):
                chosen.append(pick)
                if search(f + 1):
                    return True
                chosen.pop()
        return False

    return list(chosen) if search(0) else None


def random_interval_instance(rng: np.random.Generator, p: int) -> list[list[Interval]]:
    """Return 2^p families of 4^p intervals satisfying the family hypothesis."""
    families = []
    for _ in range(2**p):
        start = rng.uniform(0.0, 2.0)
        family = []
        for _ in range(omega(p)):
            length = rng.uniform(0.2, 1.0)
            family.append(Interval(start, start + length))
            start += length + 2.0 + rng.uniform(0.0, 1.0)
        families.append(family)
    return families


def random_ball_instance(
    rng: np.random.Generator, p: int, dim: int = 2, box: float | None = None
) -> list[list[Ball]]:
    """Return 2^p families of 4^p disjoint balls satisfying the family hypothesis."""
    size = omega(p)
    box = box or 2.0 * np.sqrt(size)
    families = []
    for _ in range(2**p):
        family: list[Ball] = []
        while len(family) < size:
            candidate = Ball(rng.uniform(0.0, box, size=dim), rng.uniform(0.05, 0.15))
            ok = all(
                candidate.dist(other) >= 2.0 * min(candidate.diameter(), other.diameter())
                for other in family
            )
            if ok:
                family.append(candidate)
        families.append(family)
    return families


def adversarial_interval_instance() -> list[list[Interval]]:
    """Return the p = 1 instance where every first-family set touches one second-family set."""
    first = [Interval(4.0 * k, 4.0 * k + 1.0) for k in range(4)]
    second = [Interval(4.0 * k + 1.0, 4.0 * k + 1.5) for k in range(4)]
    return [first, second]


# ---------------------------------------------------------------------------
# harness


def verify_subfamilies(
    families: Sequence[Sequence[AbstractOpenSet]], result: Sequence[Sequence[AbstractOpenSet]], p: int
) -> list[str]:
    """Re-check the lemma's conclusions by direct distance evaluation."""
    problems = []
    zero = _zero_tol([s for family in families for s in family])
    for f, (family, sub) in enumerate(zip(families, result)):
        if len(sub) < 2**p:
            problems.append(f"family {f} kept {len(sub)} < {2**p} sets")
        if any(not any(s is t for t in family) for s in sub):
            problems.append(f"family {f} kept a foreign set")
    for f, g in combinations(range(len(result)), 2):
        for first in result[f]:
            for second in result[g]:
                if first.dist(second) <= zero:
                    problems.append(f"families {f} and {g} keep touching sets {first!r} and {second!r}")
    return problems


@dataclass
class HarnessReport:
    """Outcome of the seeded combinatorial harness."""

    p: int
    kind: str
    instances: int
    verified: int = 0
    oracle_checked: int = 0
    oracle_agreed: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Return True when every instance verified and agreed with the oracle."""
        return self.verified == self.instances and self.oracle_agreed == self.oracle_checked and not self.failures

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "p": self.p,
            "kind": self.kind,
            "instances": self.instances,
            "verified": self.verified,
            "oracle_checked": self.oracle_checked,
            "oracle_agreed": self.oracle_agreed,
            "failures": self.failures,
            "passed": self.passed,
        }


def run_harness(seed: int = 0, instances: int = 100, p: int = 1, kind: str = "interval") -> HarnessReport:
    """Run extract_subfamilies on seeded random instances; p = 1 is also checked by brute force."""
    rng = np.random.default_rng(seed)
    report = HarnessReport(p, kind, instances)
    for number in range(instances):
        families = random_interval_instance(rng, p) if kind == "interval" else random_ball_instance(rng, p)
        try:
            result = extract_subfamilies(families, p)
        except CombinatorialError as err:
            report.failures.append(f"instance {number}: {err}")
            continue
        problems = verify_subfamilies(families, result, p)
        if problems:
            report.failures.extend(f"instance {number}: {msg}" for msg in problems)
        else:
            report.verified += 1
        if p == 1:
            report.oracle_checked += 1
            if brute_force_feasible(families, p) is not None:
                report.oracle_agreed += 1
            else:
                report.failures.append(f"instance {number}: brute force finds no feasible choice")
    _LOGGER.info(
        "Combinatorial harness p=%d: %d/%d verified, oracle %d/%d",
        p, report.verified, instances, report.oracle_agreed, report.oracle_checked,
    )
    return report


# ---------------------------------------------------------------------------
# annulus tuples


def make_annulus_tuple(domain: AmbientDomain, x: np.ndarray, radii: Sequence[float]) -> COTuple:
    """Return (M \\ B_r1, annuli B_{r_{l-1}/9} \\ B_{r_l}, B_{r_last}) around x.

    Radii are metric radii, converted with the metric scale at x.
    """
    x = np.asarray(x, dtype=float)
    radii = [float(r) for r in radii]
    if len(radii) < 2:
        raise RadiiTooClose("An annulus tuple needs at least two radii")
    if radii[0] >= domain.diameter * float(np.exp(domain.phi_value(x))):
        raise RadiiTooClose(f"r_1 = {radii[0]} exceeds the domain scale")
    for l in range(1, len(radii)):
        if not radii[l] * RADIUS_RATIO < radii[l - 1]:
            raise RadiiTooClose(
                f"r_{l + 1} = {radii[l]} is not below r_{l} / {RADIUS_RATIO:g} = {radii[l - 1] / RADIUS_RATIO}"
            )
    scale = float(np.exp(-domain.phi_value(x)))
    euclid = [r * scale for r in radii]
    sets: list[AbstractOpenSet] = [ComplementBall(x, euclid[0], extent=domain.diameter)]
    for l in range(1, len(euclid) - 1):
        sets.append(Annulus(x, euclid[l], euclid[l - 1] / RADIUS_RATIO))
    sets.append(Ball(x, euclid[-1]))
    result = COTuple(sets)
    bad = result.violations()
    if bad:
        raise CombinatorialError(f"Annulus tuple breaks the separation condition at {bad}")
    return result


# ---------------------------------------------------------------------------
# cube covering


@dataclass
class RefinedCube:
    """One of the 2^m sub-cubes Q(t_r + a * eta, 3 eta / 5) of a parent cube."""

    parent: int
    offset: tuple[float, ...]
    center: np.ndarray
    half_side: float
    candidates: list[int] = field(default_factory=list)
    assigned: int | None = None


@dataclass
class CubeCovering:
    """Staggered covering of K with refined cubes and their assigned open sets."""

    m: int
    eta: float
    eta_tilde: float
    delta: float
    parent_centers: np.ndarray
    parent_sets: list[list[AbstractOpenSet]]
    cubes: list[RefinedCube]
    max_overlap: int = 0
    touches_boundary: bool = False

    def assigned_set(self, cube: RefinedCube) -> AbstractOpenSet:
        """Return the open set assigned to a refined cube."""
        return self.parent_sets[cube.parent][cube.assigned]

    def overlap_counts(self, points: np.ndarray) -> np.ndarray:
        """Return how many refined cubes contain each point."""
        points = np.atleast_2d(points)
        counts = np.zeros(len(points), dtype=int)
        for cube in self.cubes:
            counts += np.all(np.abs(points - cube.center) < cube.half_side, axis=1)
        return counts

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready summary."""
        return {
            "m": self.m,
            "eta": self.eta,
            "eta_tilde": self.eta_tilde,
            "delta": self.delta,
            "parents": self.parent_centers.tolist(),
            "cubes": [
                {
                    "parent": c.parent,
                    "offset": list(c.offset),
                    "center": c.center.tolist(),
                    "half_side": c.half_side,
                    "assigned": c.assigned,
                }
                for c in self.cubes
            ],
            "max_overlap": self.max_overlap,
            "touches_boundary": self.touches_boundary,
        }


def _cubes_meet(c1: np.ndarray, h1: float, c2: np.ndarray, h2: float) -> bool:
    return bool(np.all(np.abs(c1 - c2) < h1 + h2))


def _assign(covering: CubeCovering) -> None:
    """Depth-first choice of one candidate per refined cube."""
    cubes = covering.cubes
    sets = covering.parent_sets
    zero = _zero_tol([s for family in sets for s in family])
    neighbours: list[list[int]] = [[] for _ in cubes]
    for i, j in combinations(range(len(cubes)), 2):
        if cubes[i].parent != cubes[j].parent and _cubes_meet(
            cubes[i].center, cubes[i].half_side, cubes[j].center, cubes[j].half_side
        ):
            neighbours[i].append(j)
            neighbours[j].append(i)
    siblings: dict[int, list[int]] = {}
    for i, cube in enumerate(cubes):
        siblings.setdefault(cube.parent, []).append(i)

    def allowed(i: int, choice: int) -> bool:
        cube = cubes[i]
        for s in siblings[cube.parent]:
            if s != i and cubes[s].assigned == choice:
                return False
        candidate = sets[cube.parent][choice]
        for j in neighbours[i]:
            other = cubes[j]
            if other.assigned is not None and candidate.dist(sets[other.parent][other.assigned]) <= zero:
                return False
        return True

    def search(i: int) -> bool:
        if i == len(cubes):
            return True
        for choice in cubes[i].candidates:
            if allowed(i, choice):
                cubes[i].assigned = choice
                if search(i + 1):
                    return True
                cubes[i].assigned = None
        return False

    if not search(0):
        raise AssignmentConflict("No open-set assignment separates every pair of meeting refined cubes")


def refine_covering(
    points: np.ndarray,
    eta: float,
    family_assignment: Callable[[np.ndarray], Sequence[AbstractOpenSet]],
    m: int | None = None,
) -> CubeCovering:
    """Cover the point set K of [0, 1]^m by refined cubes with assigned open sets.

    ``family_assignment`` returns the omega_m-tuple of a parent cube centre.
    """
    points = np.asarray(points, dtype=float)
    if m is None:
        m = points.shape[1] if points.ndim == 2 and points.size else 1
    points = points.reshape(-1, m)
    eta_tilde = ETA_TILDE_FACTOR * eta
    delta = DELTA_FACTOR * eta
    half = REFINED_HALF_SIDE * eta
    if len(points) == 0:
        return CubeCovering(m, eta, eta_tilde, delta, np.zeros((0, m)), [], [])

    xi = 0
    while (2 * xi + 1) * eta_tilde <= 1.0 - eta:
        xi += 1
    parent_centers = []
    for r in product(range(xi + 1), repeat=m):
        center = (2.0 * np.asarray(r) + 1.0) * eta_tilde
        if np.any(np.all(np.abs(points - center) < eta, axis=1)):
            parent_centers.append(center)
    parent_centers = np.asarray(parent_centers)
    parent_sets = [list(family_assignment(c)) for c in parent_centers]
    for r, family in enumerate(parent_sets):
        if len(family) < omega(m):
            raise TooFewSets(f"Parent cube {r} has {len(family)} sets, needs {omega(m)}")

    cubes: list[RefinedCube] = []
    for r, center in enumerate(parent_centers):
        for a in product((-REFINED_OFFSET, REFINED_OFFSET), repeat=m):
            cubes.append(RefinedCube(r, tuple(a), center + np.asarray(a) * eta, half))

    for cube in cubes:
        others = [
            q for q in range(len(parent_centers))
            if q != cube.parent and _cubes_meet(cube.center, half, parent_centers[q], eta)
        ]
        families = [parent_sets[cube.parent]] + [parent_sets[q] for q in others]
        subfamilies = extract_subfamilies(families, m)
        ids = {id(s): j for j, s in enumerate(parent_sets[cube.parent])}
        cube.candidates = [ids[id(s)] for s in subfamilies[0]]

    touches = bool(np.any(parent_centers - eta <= 0.0) or np.any(parent_centers + eta >= 1.0))
    covering = CubeCovering(m, eta, eta_tilde, delta, parent_centers, parent_sets, cubes, touches_boundary=touches)
    if touches:
        _LOGGER.warning("Covering cubes reach the boundary of the parameter cube; decrease eta")
    _assign(covering)

    # overlap bound on the lattice of step eta / 20
    axis = np.arange(0.0, 1.0 + 1e-12, eta / 20.0)
    lattice = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    covering.max_overlap = int(np.max(covering.overlap_counts(lattice)))
    if covering.max_overlap > 2**m:
        raise CombinatorialError(f"A parameter point lies in {covering.max_overlap} refined cubes")

    for cube in cubes:
        mine = covering.assigned_set(cube)
        for other in cubes:
            if other.parent != cube.parent and _cubes_meet(cube.center, half, other.center, half):
                if mine.dist(covering.assigned_set(other)) <= _zero_tol([mine]):
                    raise AssignmentConflict("Meeting refined cubes share touching open sets")

    shrunk = half - delta
    covered = np.zeros(len(points), dtype=bool)
    for cube in cubes:
        covered |= np.all(np.abs(points - cube.center) < shrunk, axis=1)
    if not np.all(covered):
        missing = points[~covered][0]
        raise CoverageGap(f"Point {missing.tolist()} is not covered by the shrunk cubes")
    _LOGGER.info(
        "Covering: %d parent cubes, %d refined cubes, overlap %d, delta %.3g",
        len(parent_centers),
        len(cubes),
        covering.max_overlap,
        delta,
    )
    return covering
