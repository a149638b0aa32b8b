"""Shared context information for all tests."""

import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))
# pylint: disable=wrong-import-position
from libincompat.energy import Laws
from libincompat.field_expr import parse_field
from libincompat.geometry import Chart, DistanceOptions, LatticeFrame, MetricField
from libincompat.triangulation import (
    MeasureOptions,
    TriangleMeasures,
    Triangulation,
    build_lattice,
    compute_measures,
)

# pylint: enable=wrong-import-position

NON_FLAT_PHI = "exp((x^2 + y^2) / 2)"


def fast_measures(tri: Triangulation, g: MetricField) -> TriangleMeasures:
    """Measures with straight-segment edge distances."""
    return compute_measures(tri, g, MeasureOptions(distance=DistanceOptions(fast=True)))


@pytest.fixture(scope="session")
def hexagonal_frame() -> LatticeFrame:
    """The unit equilateral lattice frame."""
    return LatticeFrame.hexagonal()


@pytest.fixture(scope="session")
def euclidean_metric(hexagonal_frame: LatticeFrame) -> MetricField:
    """G = I."""
    return MetricField.euclidean(hexagonal_frame)


@pytest.fixture(scope="session")
def non_flat_metric(hexagonal_frame: LatticeFrame) -> MetricField:
    """G = exp(x^2 + y^2) I, negatively curved everywhere."""
    return MetricField.conformal(hexagonal_frame, parse_field(NON_FLAT_PHI))


@pytest.fixture(scope="session")
def default_laws() -> Laws:
    """Hookean bonds with the Huber volume penalty."""
    return Laws.default()


@pytest.fixture(scope="session")
def small_flat_mesh(
    hexagonal_frame: LatticeFrame, euclidean_metric: MetricField
) -> tuple[Triangulation, TriangleMeasures]:
    """The Euclidean unit square at eps = 0.25."""
    tri = build_lattice(Chart.unit_square(), hexagonal_frame, euclidean_metric, 0.25)
    return tri, fast_measures(tri, euclidean_metric)


@pytest.fixture(scope="session")
def small_curved_mesh(
    hexagonal_frame: LatticeFrame, non_flat_metric: MetricField
) -> tuple[Triangulation, TriangleMeasures]:
    """The exponential conformal metric on the unit square at eps = 0.25."""
    tri = build_lattice(Chart.unit_square(), hexagonal_frame, non_flat_metric, 0.25)
    return tri, fast_measures(tri, non_flat_metric)
