"""Exceptions raised by the min-max solver."""

from __future__ import annotations


class MinMaxError(Exception):
    """Base class for solver errors."""


class ConfigError(MinMaxError):
    """Scenario configuration failed validation."""

    def __init__(self, message: str, path: list | None = None) -> None:
        """Initialize with the schema path of the offending key."""
        self.path = list(path or [])
        where = "/".join(str(part) for part in self.path)
        super().__init__(f"{message} (at '{where}')" if where else message)


class PhaseError(MinMaxError):
    """A pipeline phase failed."""

    def __init__(self, phase: str, message: str) -> None:
        """Initialize with the failing phase tag."""
        self.phase = phase
        super().__init__(f"[{phase}] {message}")


class ArtifactError(MinMaxError):
    """An artifact file could not be read."""


# ambient


class DomainError(MinMaxError):
    """Ambient domain errors."""


class PointNotOnBoundary(DomainError):
    """Point is farther than tol_bdry from the boundary."""


class NotUniformlyConvex(DomainError):
    """Boundary curvature is not bounded below by a positive constant."""


class PointOutsideDomain(DomainError):
    """Point lies outside the closed domain."""


# sweepout


class SweepoutError(MinMaxError):
    """Slice and family errors."""


class DegenerateGeometry(SweepoutError):
    """Slice has degenerate faces or malformed arrays."""


class EmptyFamily(SweepoutError):
    """Family has no slices."""


class NotDisjoint(SweepoutError):
    """Two slices intersect away from gamma."""


class NoCommonBoundary(SweepoutError):
    """Two slices do not share their boundary on gamma."""


class IncompatibleSlices(SweepoutError):
    """Slices cannot be interpolated against each other."""


# tighten


class TightenError(MinMaxError):
    """Pull-tight errors."""


class ClassViolation(TightenError):
    """Vector field violates the constraints of its class."""


class StepDiverged(TightenError):
    """A slice left the closed domain."""


# amin


class AlmostMinimizingError(MinMaxError):
    """Almost-minimizing search and freezing errors."""


class NotGraphical(AlmostMinimizingError):
    """Neighbour slices are not graphs over the frozen slice."""


class EstimateViolated(AlmostMinimizingError):
    """A measured estimate exceeded its certified bound."""


class BudgetTooSmall(UserWarning):
    """Search stopped on its budget before the descent converged."""


# comb


class CombinatorialError(MinMaxError):
    """Combinatorial lemma and covering errors."""


class HypothesisViolated(CombinatorialError):
    """A family violates the separation hypothesis."""

    def __init__(self, family: int, pair: tuple[int, int], message: str) -> None:
        """Initialize with the offending family index and set pair."""
        self.family = family
        self.pair = pair
        super().__init__(message)


class TooFewSets(CombinatorialError):
    """Families are smaller than 4**p."""


class RadiiTooClose(CombinatorialError):
    """Consecutive annulus radii are not separated by a factor 9."""


class CoverageGap(CombinatorialError):
    """Shrunk cubes miss a point of the compact set."""


class AssignmentConflict(CombinatorialError):
    """No consistent open-set assignment exists for the refined cubes."""


# plateau


class PlateauError(MinMaxError):
    """Local Plateau minimisation errors."""


class BarrierBlocked(PlateauError):
    """No admissible descent below the energy barrier was found."""


class NotTransversal(PlateauError):
    """Slice stays tangent to the cone sphere after all radius retries."""


# varifold


class VarifoldError(MinMaxError):
    """Varifold diagnostics errors."""


class RadiiOutOfRange(VarifoldError):
    """Radii are not increasing or exceed the local scale."""


class NotStationary(VarifoldError):
    """Slice residual exceeds the stationarity tolerance."""


class NotStable(VarifoldError):
    """Slice has no positive stability margin."""


class EvenCount(VarifoldError):
    """Vector count must be odd."""


class AngleOutOfRange(VarifoldError):
    """Vector angle is outside the open half plane."""
