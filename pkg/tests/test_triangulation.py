"""Test the hexagonal triangulation and its measures."""

import math

import numpy as np
import pytest

from libincompat.exceptions import MeshException
from libincompat.field_expr import parse_field
from libincompat.geometry import Chart, LatticeFrame, MetricField
from libincompat.triangulation import (
    MINUS,
    PLUS,
    MeasureOptions,
    build_lattice,
    chart_volume,
    closest_edge_fractions,
    compute_measures,
    coverage_defect,
    density_radius,
    edge_weight,
    locate,
    rescaled_distances,
    ring_vertices,
    triangle_area,
    triangle_rule,
)

from tests.context import fast_measures


def test_triangle_rules():
    """Test rule lookup and that weights sum to one."""
    for degree in (1, 2, 3, 6):
        points, weights = triangle_rule(degree)
        assert weights.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(points.sum(axis=1), 1.0)
    assert len(triangle_rule(3)[1]) == len(triangle_rule(6)[1])
    with pytest.raises(ValueError, match="highest is 6"):
        triangle_rule(7)


def test_triangle_area_is_exact_for_polynomial_density(hexagonal_frame):
    """Test the integral of (1 + x)^2 over the unit right triangle."""
    metric = MetricField.conformal(hexagonal_frame, parse_field("1 + x"))
    corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    assert triangle_area(metric, corners) == pytest.approx(11 / 12, rel=1e-12)
    assert triangle_area(metric, corners, subdivisions=3) == pytest.approx(11 / 12, rel=1e-12)


def test_build_lattice_structure(small_flat_mesh):
    """Test orientation, edge axes and edge incidence of the mesh."""
    tri, _ = small_flat_mesh
    assert tri.vertex_count > 0
    assert set(np.unique(tri.orientations)) == {PLUS, MINUS}

    frame = tri.frame
    for (p, q), axis in zip(tri.edges, tri.edge_axes):
        np.testing.assert_allclose(
            tri.vertices[q] - tri.vertices[p], tri.epsilon * frame.axes[axis], atol=1e-12
        )

    assert np.all((tri.edge_triangle_count >= 1) & (tri.edge_triangle_count <= 2))
    chart = Chart.unit_square()
    assert np.all(chart.contains(tri.vertices))


def test_triangles_follow_the_frame(small_flat_mesh):
    """Test q - p = s eps a and r - q = s eps b."""
    tri, _ = small_flat_mesh
    corners = tri.corners
    sign = tri.orientations[:, None].astype(float)
    a = np.asarray(tri.frame.a)
    b = np.asarray(tri.frame.b)
    np.testing.assert_allclose(corners[:, 1] - corners[:, 0], sign * tri.epsilon * a, atol=1e-12)
    np.testing.assert_allclose(corners[:, 2] - corners[:, 1], sign * tri.epsilon * b, atol=1e-12)


def test_signs_follow_the_chart_area(small_flat_mesh):
    """Test each triangle carries the sign of (q - p) ∧ (r - q) for either handedness."""
    tri, _ = small_flat_mesh
    left = LatticeFrame((-0.5, math.sqrt(3) / 2), (1.0, 0.0))
    mirrored = build_lattice(Chart.unit_square(), left, MetricField.euclidean(left), 0.25)
    for mesh, expected in ((tri, 1.0), (mirrored, -1.0)):
        corners = mesh.corners
        u = corners[:, 1] - corners[:, 0]
        v = corners[:, 2] - corners[:, 1]
        areas = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        np.testing.assert_array_equal(mesh.signs, np.sign(areas))
        assert np.all(mesh.signs == expected)
        assert set(np.unique(mesh.orientations)) == {PLUS, MINUS}


def test_every_vertex_is_used(small_flat_mesh):
    """Test that isolated lattice points are dropped."""
    tri, _ = small_flat_mesh
    assert set(np.unique(tri.triangles)) == set(range(tri.vertex_count))


def test_lattice_scan_order(small_flat_mesh):
    """Test vertices are ordered row-major in (j, i)."""
    tri, _ = small_flat_mesh
    keys = [(int(j), int(i)) for i, j in tri.lattice]
    assert keys == sorted(keys)


def test_interior_vertex_has_six_neighbors(small_flat_mesh):
    """Test the hexagonal connectivity."""
    tri, _ = small_flat_mesh
    interior = np.flatnonzero(~tri.boundary)
    assert len(interior) > 0
    for vertex in interior:
        neighbors = tri.neighbors(int(vertex))
        assert len(neighbors) == 6
        for other in neighbors:
            tri.edge_index(int(vertex), other)


def test_edge_index_rejects_non_adjacent(small_flat_mesh):
    """Test lookup of a missing edge."""
    tri, _ = small_flat_mesh
    first = 0
    far = int(np.argmax(np.linalg.norm(tri.vertices - tri.vertices[first], axis=1)))
    with pytest.raises(MeshException, match="not joined"):
        tri.edge_index(first, far)


def test_build_lattice_errors(hexagonal_frame, euclidean_metric):
    """Test invalid epsilon and domains too small for it."""
    with pytest.raises(ValueError, match="positive"):
        build_lattice(Chart.unit_square(), hexagonal_frame, euclidean_metric, 0.0)
    with pytest.raises(MeshException, match="too small"):
        build_lattice(Chart.unit_square(), hexagonal_frame, euclidean_metric, 5.0)


def test_offset_moves_the_lattice(hexagonal_frame, euclidean_metric):
    """Test the lattice origin follows the offset."""
    chart = Chart.unit_square()
    shifted = build_lattice(chart, hexagonal_frame, euclidean_metric, 0.25, (0.25, 0.25))
    np.testing.assert_allclose(shifted.origin, [0.0625, 0.0625])


def test_flat_measures(small_flat_mesh):
    """Test exact measures of equilateral triangles in the Euclidean metric."""
    tri, measures = small_flat_mesh
    area = math.sqrt(3) / 4 * tri.epsilon**2
    np.testing.assert_allclose(measures.mu, area, rtol=1e-12)
    np.testing.assert_allclose(measures.nu_centroid, math.sqrt(3) / 2, rtol=1e-12)
    np.testing.assert_allclose(measures.distances, tri.epsilon, rtol=1e-12)
    np.testing.assert_allclose(measures.rescaled, 1.0, rtol=1e-12)
    np.testing.assert_allclose(measures.rho, 1 / 3, atol=1e-12)


def test_rho_sums_to_one(small_curved_mesh):
    """Test closest-edge fractions form a partition."""
    _, measures = small_curved_mesh
    np.testing.assert_allclose(measures.rho.sum(axis=1), 1.0)
    assert np.all(measures.rho > 0)


def test_edge_weights_partition_the_area(small_curved_mesh):
    """Test that edge weights redistribute the triangle areas."""
    tri, measures = small_curved_mesh
    assert measures.mu_edge.sum() == pytest.approx(measures.total_area)
    for edge in (0, tri.edge_count // 2, tri.edge_count - 1):
        assert edge_weight(tri, measures, edge) == pytest.approx(measures.mu_edge[edge])


def test_closest_edge_fractions_equilateral(euclidean_metric):
    """Test an equilateral triangle splits evenly."""
    corners = [[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]]
    fractions = closest_edge_fractions(euclidean_metric, corners)
    np.testing.assert_allclose(fractions, 1 / 3, atol=1e-12)


def test_closest_edge_fractions_constant_anisotropic_metric(hexagonal_frame):
    """Test a scalene triangle under constant G splits in proportion to its G-side lengths.

    In G^(1/2) coordinates the bisectors meet at the incenter, so the region of a side is the
    triangle it spans with the incenter, of area inradius * length / 2.
    """
    tensor = np.array([[3.0, 1.0], [1.0, 1.0]])
    metric = MetricField.from_chart(
        hexagonal_frame, parse_field("3"), parse_field("1"), parse_field("1")
    )
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.3, 0.7]])
    sides = corners[[1, 2, 0]] - corners
    lengths = np.sqrt(np.einsum("si,ij,sj->s", sides, tensor, sides))
    fractions = closest_edge_fractions(metric, corners, n_sample=10000)
    np.testing.assert_allclose(fractions, lengths / lengths.sum(), atol=3e-3)
    assert sum(fractions) == pytest.approx(1.0)


def test_rescaled_distances(euclidean_metric):
    """Test D = distance / epsilon."""
    corners = 0.1 * np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    np.testing.assert_allclose(rescaled_distances(euclidean_metric, corners, 0.1), 1.0, rtol=1e-8)


def test_threaded_measures_match(hexagonal_frame, non_flat_metric):
    """Test the worker count does not change the result."""
    tri = build_lattice(Chart.unit_square(), hexagonal_frame, non_flat_metric, 0.1)
    options = MeasureOptions(n_sample=64)
    single = compute_measures(tri, non_flat_metric, options)
    threaded = compute_measures(
        tri, non_flat_metric, MeasureOptions(n_sample=64, distance=options.distance, threads=4)
    )
    np.testing.assert_array_equal(single.mu, threaded.mu)
    np.testing.assert_array_equal(single.rho, threaded.rho)
    np.testing.assert_array_equal(single.distances, threaded.distances)


def test_chart_volume_and_defect(small_flat_mesh, euclidean_metric):
    """Test the Euclidean volume of the unit square and the uncovered part."""
    tri, measures = small_flat_mesh
    chart = Chart.unit_square()
    assert chart_volume(euclidean_metric, chart) == pytest.approx(1.0)
    defect = coverage_defect(chart, tri, euclidean_metric, measures)
    assert 0 < defect < 1
    assert defect == pytest.approx(coverage_defect(chart, tri, euclidean_metric))


def test_defect_shrinks_with_epsilon(hexagonal_frame, euclidean_metric):
    """Test the uncovered volume goes to zero as the lattice refines."""
    chart = Chart.unit_square()
    defects = [
        coverage_defect(chart, build_lattice(chart, hexagonal_frame, None, eps), euclidean_metric)
        for eps in (0.2, 0.1, 0.05)
    ]
    assert defects[0] > defects[1] > defects[2] > 0


def test_density_radius(small_flat_mesh, euclidean_metric):
    """Test every chart point lies within a lattice step of a vertex."""
    tri, _ = small_flat_mesh
    radius = density_radius(Chart.unit_square(), tri, euclidean_metric, count=16)
    assert 0 < radius <= 2 * tri.epsilon


def test_locate_centroids(small_curved_mesh):
    """Test that each centroid lies in its own triangle."""
    tri, _ = small_curved_mesh
    np.testing.assert_array_equal(locate(tri, tri.centroids), np.arange(tri.triangle_count))


def test_locate_outside_uses_nearest_centroid(small_flat_mesh):
    """Test points off the mesh map to a nearby triangle."""
    tri, _ = small_flat_mesh
    found = locate(tri, [[-5.0, -5.0]])
    assert 0 <= found[0] < tri.triangle_count


def test_ring_vertices(small_flat_mesh):
    """Test the ring lies outside the mesh and touches it."""
    tri, _ = small_flat_mesh
    ring = ring_vertices(tri)
    assert len(ring.lattice) > 0
    mesh_points = {(int(i), int(j)) for i, j in tri.lattice}
    assert all((int(i), int(j)) not in mesh_points for i, j in ring.lattice)
    assert all(len(neighbors) > 0 for neighbors in ring.neighbors)
    assert np.all(np.max(ring.triangles, axis=1) >= tri.vertex_count)
    assert len(ring.orientations) == len(ring.triangles)


def test_measures_of_sheared_frame():
    """Test a non-equilateral frame still yields consistent measures."""
    frame = LatticeFrame((1.0, 0.0), (0.3, 1.0))
    metric = MetricField.euclidean(frame)
    tri = build_lattice(Chart.unit_square(), frame, metric, 0.2)
    measures = fast_measures(tri, metric)
    np.testing.assert_allclose(measures.mu, 0.5 * 0.2**2, rtol=1e-12)
    np.testing.assert_allclose(measures.rho.sum(axis=1), 1.0)
