"""Shared fixtures for the min-max solver tests."""

from __future__ import annotations

import numpy as np
import pytest

from minmax_surfaces.ambient import bump_disk, ellipse_domain, unit_ball, unit_disk
from minmax_surfaces.scenarios import arc_seed
from minmax_surfaces.sweepout import BoundaryCondition, Slice
from minmax_surfaces.tighten import relax_slice


@pytest.fixture(scope="session")
def disk():
    """Flat unit disk without gamma."""
    return unit_disk()


@pytest.fixture(scope="session")
def constrained_disk():
    """Flat unit disk with gamma = {(-1, 0), (1, 0)}."""
    return unit_disk([(-1.0, 0.0), (1.0, 0.0)])


@pytest.fixture(scope="session")
def ellipse():
    """Flat ellipse with semi-axes (2, 1)."""
    return ellipse_domain(2.0, 1.0)


@pytest.fixture(scope="session")
def bump():
    """Unit disk with a Gaussian bump metric and two gamma points."""
    return bump_disk()


@pytest.fixture(scope="session")
def ball():
    """Unit ball with gamma circles at heights +-0.4."""
    return unit_ball([0.4, -0.4])


@pytest.fixture(scope="session")
def bump_geodesics(bump):
    """The two relaxed geodesics of the bump disk, above and below the bump."""
    upper = relax_slice(bump, arc_seed(bump, (0.0, 0.6), 65))
    lower = relax_slice(bump, arc_seed(bump, (0.0, -0.6), 65))
    return upper, lower


def chord(start, stop, n: int = 33, bc: BoundaryCondition = BoundaryCondition.CONSTRAINED) -> Slice:
    """Return a straight polyline slice."""
    s = np.linspace(0.0, 1.0, n)[:, None]
    return Slice((1.0 - s) * np.asarray(start, dtype=float) + s * np.asarray(stop, dtype=float), bc=bc)


def wiggly_chord(amplitude: float = 0.05, n: int = 65, waves: int = 3) -> Slice:
    """Return the diameter y = 0 of the unit disk with a sine wiggle."""
    x = np.linspace(-1.0, 1.0, n)
    y = amplitude * np.sin(waves * np.pi * (x + 1.0) / 2.0)
    y[[0, -1]] = 0.0
    return Slice(np.column_stack([x, y]), bc=BoundaryCondition.CONSTRAINED)
