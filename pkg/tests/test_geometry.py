"""Test the chart geometry, metric fields and fiber algebra."""

import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from libincompat.exceptions import ChartDomainException, MetricException
from libincompat.field_expr import parse_field
from libincompat.geometry import (
    Chart,
    DistanceOptions,
    LatticeFrame,
    MetricField,
    conformal_factor,
    conformal_residual,
    conformal_transport,
    dist_squared_to_O,
    dist_squared_to_SO,
    dist_to_O,
    dist_to_SO,
    exp_connection,
    exp_triangle_closure,
    fiber_norm,
    gauss_curvature,
    gauss_legendre,
    isometry,
    metric_rotation,
    metric_sqrt,
    parallel_transport,
    riemannian_distance,
    riemannian_distances,
    segment_length,
    singular_values_g,
)


def test_chart_bounds():
    """Test that degenerate charts are rejected."""
    with pytest.raises(ValueError, match="x0 < x1"):
        Chart(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="x0 < x1"):
        Chart(0.0, 1.0, 0.5, 0.5)


def test_chart_contains_and_grid():
    """Test membership and grid sampling."""
    chart = Chart(0.0, 2.0, -1.0, 1.0)
    assert chart.contains([1.0, 0.0])
    assert not chart.contains([2.5, 0.0])
    np.testing.assert_allclose(chart.center, [1.0, 0.0])
    grid = chart.grid(4, margin=0.1)
    assert grid.shape == (16, 2)
    assert np.all(chart.contains(grid))
    assert grid[:, 0].min() == pytest.approx(0.1)
    assert grid[:, 1].max() == pytest.approx(0.9)


def test_hexagonal_frame():
    """Test the equilateral frame has unit sides and a, b, c sum to zero."""
    frame = LatticeFrame.hexagonal()
    np.testing.assert_allclose(np.linalg.norm(frame.axes, axis=1), 1.0)
    np.testing.assert_allclose(frame.axes.sum(axis=0), 0.0, atol=1e-15)
    assert frame.area == pytest.approx(math.sqrt(3) / 2)


def test_dependent_frame_is_rejected():
    """Test parallel lattice directions."""
    with pytest.raises(ValueError, match="independent"):
        LatticeFrame((1.0, 0.0), (2.0, 0.0))


def test_euclidean_metric(euclidean_metric):
    """Test G = I and the frame coefficients of the equilateral frame."""
    points = np.array([[0.2, 0.3], [0.9, 0.1]])
    identity = np.broadcast_to(np.eye(2), (2, 2, 2))
    np.testing.assert_allclose(euclidean_metric.tensor(points), identity)
    g_aa, g_bb, g_ab = euclidean_metric.frame_coefficients(points)
    np.testing.assert_allclose(g_aa, 1.0)
    np.testing.assert_allclose(g_bb, 1.0)
    np.testing.assert_allclose(g_ab, -0.5)
    np.testing.assert_allclose(euclidean_metric.nu(points), math.sqrt(3) / 2)
    np.testing.assert_allclose(euclidean_metric.axis_lengths(points), 1.0)


def test_frame_and_chart_components_agree(hexagonal_frame):
    """Test that a metric given in the frame converts to the chart basis consistently."""
    metric = MetricField(
        hexagonal_frame, parse_field("2 + x"), parse_field("1 + y^2"), parse_field("0.1 * x")
    )
    point = np.array([0.4, 0.7])
    tensor = metric.tensor(point)
    a, b = np.asarray(hexagonal_frame.a), np.asarray(hexagonal_frame.b)
    assert a @ tensor @ a == pytest.approx(2.4)
    assert b @ tensor @ b == pytest.approx(1.49)
    assert a @ tensor @ b == pytest.approx(0.04)


def test_conformal_metric(non_flat_metric):
    """Test G = phi^2 I."""
    point = np.array([0.3, 0.4])
    phi = math.exp(0.125)
    np.testing.assert_allclose(non_flat_metric.tensor(point), phi**2 * np.eye(2))
    assert non_flat_metric.is_conformal
    assert non_flat_metric.sqrt_det(point) == pytest.approx(phi**2)


def test_metric_norm(non_flat_metric):
    """Test |v|_g for a conformal metric."""
    point = np.array([0.0, 0.0])
    assert non_flat_metric.norm(point, [3.0, 4.0]) == pytest.approx(5.0)


def test_check_spd_rejects_indefinite_metric(hexagonal_frame):
    """Test SPD checking over the chart."""
    metric = MetricField.from_chart(
        hexagonal_frame, parse_field("1"), parse_field("x - 0.5"), parse_field("0")
    )
    with pytest.raises(MetricException, match="not positive definite"):
        metric.check_spd(Chart.unit_square(), count=8)
    MetricField.euclidean(hexagonal_frame).check_spd(Chart.unit_square(), count=8)


def test_exp_connection_is_affine():
    """Test exp(p, v) = p + v and the chart membership flag."""
    point, inside = exp_connection([0.2, 0.2], [0.1, 0.3], Chart.unit_square())
    np.testing.assert_allclose(point, [0.3, 0.5])
    assert inside
    assert not exp_connection([0.9, 0.9], [0.2, 0.0], Chart.unit_square()).inside


def test_parallel_transport_is_identity():
    """Test the trivial connection transports vectors unchanged."""
    np.testing.assert_allclose(parallel_transport([0, 0], [1, 1], [2.0, -1.0]), [2.0, -1.0])


def test_exp_triangle_closure():
    """Test exp(p, w) = exp(exp(p, v), transport(w - v))."""
    assert exp_triangle_closure([0.1, 0.2], [0.3, -0.1], [0.05, 0.4])


def test_conformal_transport_ratio():
    """Test transport scales by phi(p) / phi(q)."""
    phi = parse_field("1 + x")
    transported = conformal_transport([0.0, 0.0], [1.0, 0.0], [2.0, 4.0], phi)
    np.testing.assert_allclose(transported, [1.0, 2.0])


def test_conformal_transport_rejects_nonpositive_factor():
    """Test phi must be positive."""
    with pytest.raises(MetricException, match="positive"):
        conformal_transport([0.0, 0.0], [2.0, 0.0], [1.0, 0.0], parse_field("1 - x"))


def test_gauss_legendre_integrates_polynomials():
    """Test n nodes integrate degree 2n - 1 exactly on [0, 1]."""
    nodes, weights = gauss_legendre(3)
    assert weights.sum() == pytest.approx(1.0)
    assert np.sum(weights * nodes**5) == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        gauss_legendre(0)


def test_segment_length_euclidean(euclidean_metric):
    """Test a straight segment in the flat metric."""
    assert segment_length([0.1, 0.1], [0.3, 0.4], euclidean_metric) == pytest.approx(0.5)


def test_segment_length_conformal(hexagonal_frame):
    """Test the length of a segment under phi = 1 + x."""
    metric = MetricField.conformal(hexagonal_frame, parse_field("1 + x"))
    assert segment_length([0.0, 0.0], [1.0, 0.0], metric) == pytest.approx(1.5)


def test_segment_length_against_adaptive_quadrature(non_flat_metric):
    """Test the exponential metric against scipy's adaptive quadrature."""
    expected, _ = scipy.integrate.quad(lambda t: 0.1 * math.exp((0.1 * t) ** 2 / 2), 0, 1)
    length = segment_length([0.0, 0.0], [0.1, 0.0], non_flat_metric, n_quad=16)
    assert length == pytest.approx(expected, abs=1e-10)


def test_singular_values_against_svd():
    """Test the g-singular values are those of A G^(-1/2)."""
    rng = np.random.default_rng(12)
    a = rng.normal(size=(2, 2))
    factor = rng.normal(size=(2, 2))
    metric = factor @ factor.T + np.eye(2)
    expected = scipy.linalg.svd(a @ np.real(scipy.linalg.inv(scipy.linalg.sqrtm(metric))))[1]
    sigma1, sigma2, _ = singular_values_g(a, metric)
    np.testing.assert_allclose([sigma1, sigma2], expected, rtol=1e-9)


def test_segment_length_errors(euclidean_metric):
    """Test quadrature and chart checks."""
    with pytest.raises(ValueError, match="n_quad"):
        segment_length([0, 0], [1, 0], euclidean_metric, n_quad=1)
    with pytest.raises(ChartDomainException, match="leaves"):
        segment_length([0.5, 0.5], [1.0, 0.0], euclidean_metric, chart=Chart.unit_square())


def test_distance_in_flat_metric(euclidean_metric):
    """Test that the relaxed polyline stays straight in a flat metric."""
    distance = riemannian_distance([0.1, 0.2], [0.7, 0.5], euclidean_metric)
    assert distance == pytest.approx(math.hypot(0.6, 0.3), rel=1e-8)


def test_distance_never_exceeds_straight_segment(non_flat_metric):
    """Test relaxation only shortens the straight segment."""
    ps = np.array([[0.0, 0.0], [0.2, 0.5], [-0.3, 0.4]])
    qs = np.array([[0.6, 0.6], [0.8, -0.1], [0.5, 0.4]])
    result = riemannian_distances(ps, qs, non_flat_metric)
    straight = riemannian_distances(ps, qs, non_flat_metric, DistanceOptions(fast=True))
    assert np.all(result.distances <= straight.distances + 1e-10)
    assert np.all(result.distances > 0)


def test_distance_endpoint_shapes(euclidean_metric):
    """Test mismatched endpoint arrays."""
    with pytest.raises(ValueError, match="differ in shape"):
        riemannian_distances(np.zeros((2, 2)), np.zeros((3, 2)), euclidean_metric)


def test_distance_options_validation():
    """Test invalid relaxation settings."""
    with pytest.raises(ValueError, match="at least 2 nodes"):
        DistanceOptions(nodes=1)
    with pytest.raises(ValueError, match="non-negative"):
        DistanceOptions(max_iterations=-1)


def test_flat_metric_has_zero_curvature(euclidean_metric):
    """Test K = 0 for G = I."""
    points = Chart.unit_square().grid(5)
    np.testing.assert_allclose(gauss_curvature(euclidean_metric, points), 0.0, atol=1e-12)


def test_exponential_metric_curvature(non_flat_metric):
    """Test K = -2 exp(-(x^2 + y^2)) for phi = exp((x^2 + y^2) / 2)."""
    points = Chart.unit_square().grid(4)
    expected = -2 * np.exp(-np.sum(points**2, axis=-1))
    np.testing.assert_allclose(gauss_curvature(non_flat_metric, points), expected, rtol=1e-9)


def test_sphere_metric_curvature(hexagonal_frame):
    """Test K = 1 for the stereographic sphere metric."""
    metric = MetricField.conformal(hexagonal_frame, parse_field("2 / (1 + x^2 + y^2)"))
    assert gauss_curvature(metric, [0.3, -0.2]) == pytest.approx(1.0)


def test_conformal_residual_and_factor(non_flat_metric, hexagonal_frame):
    """Test conformality detection and recovery of phi."""
    samples = Chart.unit_square().grid(5)
    assert conformal_residual(non_flat_metric, samples) <= 1e-12
    anisotropic = MetricField.from_chart(
        hexagonal_frame, parse_field("1 + x^2"), parse_field("1"), parse_field("0")
    )
    assert conformal_residual(anisotropic, samples) > 0.1

    stripped = MetricField.from_chart(
        hexagonal_frame, non_flat_metric.g11, non_flat_metric.g22, non_flat_metric.g12
    )
    phi = conformal_factor(stripped)
    assert phi.evaluate(0.5, 0.5) == pytest.approx(math.exp(0.25))


def test_metric_sqrt():
    """Test the SPD square root and degenerate input."""
    metric = np.array([[2.0, 0.5], [0.5, 1.0]])
    root = metric_sqrt(metric)
    np.testing.assert_allclose(root @ root, metric, atol=1e-14)
    np.testing.assert_allclose(root, root.T)
    with pytest.raises(MetricException, match="Degenerate"):
        metric_sqrt(np.zeros((2, 2)))


def test_isometries_have_zero_distance():
    """Test R G^(1/2) lies in SO(g) and its reflection in O(g) only."""
    metric = np.array([[2.0, 0.3], [0.3, 0.7]])
    rotation_map = isometry(metric, 0.7)
    reflection_map = isometry(metric, 0.7, reflect=True)
    assert dist_squared_to_SO(rotation_map, metric) == pytest.approx(0.0, abs=1e-12)
    assert dist_squared_to_O(reflection_map, metric) == pytest.approx(0.0, abs=1e-12)
    assert dist_squared_to_SO(reflection_map, metric) == pytest.approx(4.0)
    assert dist_to_SO(reflection_map, metric) == pytest.approx(2.0)
    assert dist_to_O(2.0 * np.eye(2), np.eye(2)) == pytest.approx(math.sqrt(2.0))


def test_singular_values_g():
    """Test singular values of a diagonal map in the Euclidean metric."""
    sigma1, sigma2, det_sign = singular_values_g(np.diag([3.0, -0.5]), np.eye(2))
    assert sigma1 == pytest.approx(3.0)
    assert sigma2 == pytest.approx(0.5)
    assert det_sign == -1.0
    assert fiber_norm(np.diag([3.0, -0.5]), np.eye(2)) == pytest.approx(math.sqrt(9.25))


def test_distance_to_so_exceeds_distance_to_o():
    """Test dist(A, SO) >= dist(A, O) with equality for det A > 0."""
    rng = np.random.default_rng(3)
    maps = rng.normal(size=(200, 2, 2))
    metric = np.eye(2)
    to_so = dist_squared_to_SO(maps, metric)
    to_o = dist_squared_to_O(maps, metric)
    assert np.all(to_so >= to_o - 1e-12)
    positive = np.linalg.det(maps) > 0
    np.testing.assert_allclose(to_so[positive], to_o[positive], atol=1e-12)


def test_metric_rotation_preserves_g_norm():
    """Test g-rotations are g-isometries of the tangent plane."""
    metric = np.array([[1.5, -0.4], [-0.4, 0.8]])
    turn = metric_rotation(metric, math.pi / 3)
    v = np.array([0.3, 1.1])
    assert (turn @ v) @ metric @ (turn @ v) == pytest.approx(v @ metric @ v)
