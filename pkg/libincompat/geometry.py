"""Chart geometry of a flat symmetric connection with a Riemannian metric.

The connection is the trivial connection of a distinguished chart, so its exponential map and
parallel transport are affine. The metric is given by its coefficients in the lattice frame
{a, b} and is converted once, symbolically, to the chart basis.
"""

import dataclasses
import functools
import math
from typing import ClassVar, NamedTuple

import numpy as np
import numpy.typing as npt

from libincompat.exceptions import ChartDomainException, MetricException
from libincompat.field_expr import ScalarFieldExpr
from libincompat.optimizer import LbfgsOptions, lbfgs_minimize
from libincompat.utilities import FloatArray, Log, rotation, wedge


class Constants:
    """Numerical tolerances used by the geometry routines."""

    SPD_TOLERANCE: ClassVar[float] = 1e-12
    FRAME_TOLERANCE: ClassVar[float] = 1e-12
    DOMAIN_SLACK: ClassVar[float] = 1e-12
    SPD_GRID: ClassVar[int] = 64
    RELAXATION_GRADIENT: ClassVar[float] = 1e-13
    STALL_GRADIENT: ClassVar[float] = 1e-7


@dataclasses.dataclass(frozen=True)
class Chart:
    """The body as an axis-aligned rectangle [x0, x1] x [y0, y1] in chart coordinates."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(
                f"Chart bounds must satisfy x0 < x1 and y0 < y1, got {self.bounds}"
            )

    @staticmethod
    def unit_square() -> "Chart":
        """The rectangle [0, 1] x [0, 1]."""
        return Chart(0.0, 1.0, 0.0, 1.0)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(x0, x1, y0, y1)"""
        return (self.x0, self.x1, self.y0, self.y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> FloatArray:
        return np.array([(self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2])

    def contains(
        self, points: npt.ArrayLike, slack: float = Constants.DOMAIN_SLACK
    ) -> npt.NDArray[np.bool_]:
        """Whether each point of a (..., 2) array lies in the closed rectangle."""
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        return (
            (x >= self.x0 - slack)
            & (x <= self.x1 + slack)
            & (y >= self.y0 - slack)
            & (y <= self.y1 + slack)
        )

    def grid(self, count: int, margin: float = 0.0) -> FloatArray:
        """A count x count grid of points, shape (count * count, 2), inset by margin."""
        xs = np.linspace(self.x0 + margin, self.x1 - margin, count)
        ys = np.linspace(self.y0 + margin, self.y1 - margin, count)
        mesh_x, mesh_y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([mesh_x.ravel(), mesh_y.ravel()], axis=-1)

    def __str__(self) -> str:
        return f"[{self.x0}, {self.x1}] x [{self.y0}, {self.y1}]"


@dataclasses.dataclass(frozen=True)
class LatticeFrame:
    """The constant lattice directions a, b and c = -a - b in chart coordinates."""

    a: tuple[float, float]
    b: tuple[float, float]

    def __post_init__(self) -> None:
        if abs(float(wedge(self.a, self.b))) <= Constants.FRAME_TOLERANCE:
            raise ValueError(f"Lattice directions must be independent, got a={self.a}, b={self.b}")

    @staticmethod
    def hexagonal() -> "LatticeFrame":
        """The unit equilateral frame a = (1, 0), b = (-1/2, sqrt(3)/2)."""
        return LatticeFrame((1.0, 0.0), (-0.5, math.sqrt(3.0) / 2))

    @property
    def c(self) -> tuple[float, float]:
        return (-self.a[0] - self.b[0], -self.a[1] - self.b[1])

    @property
    def axes(self) -> FloatArray:
        """Rows a, b, c."""
        return np.array([self.a, self.b, self.c], dtype=float)

    @property
    def matrix(self) -> FloatArray:
        """The matrix [a b] whose columns are the frame vectors."""
        return np.array([[self.a[0], self.b[0]], [self.a[1], self.b[1]]], dtype=float)

    @property
    def area(self) -> float:
        """Chart area a ∧ b of the frame parallelogram (signed)."""
        return float(wedge(self.a, self.b))

    @property
    def handedness(self) -> float:
        """+1 if (a, b) is positively oriented in the chart, -1 otherwise."""
        return 1.0 if self.area > 0 else -1.0


def _spd_sqrt(matrix: FloatArray) -> FloatArray:
    """Closed-form square root of (a stack of) 2x2 SPD matrices."""
    root_det = np.sqrt(np.linalg.det(matrix))
    trace = matrix[..., 0, 0] + matrix[..., 1, 1]
    scale = np.sqrt(trace + 2 * root_det)
    result = matrix.copy()
    result[..., 0, 0] += root_det
    result[..., 1, 1] += root_det
    return result / scale[..., None, None]


def _inverse_2x2(matrix: FloatArray) -> FloatArray:
    det = matrix[..., 0, 0] * matrix[..., 1, 1] - matrix[..., 0, 1] * matrix[..., 1, 0]
    result = np.empty_like(matrix)
    result[..., 0, 0] = matrix[..., 1, 1]
    result[..., 1, 1] = matrix[..., 0, 0]
    result[..., 0, 1] = -matrix[..., 0, 1]
    result[..., 1, 0] = -matrix[..., 1, 0]
    return result / det[..., None, None]


class MetricField:
    """A smooth SPD metric given by its coefficients g_aa, g_bb, g_ab in the lattice frame.

    Chart components G = F^-T [[g_aa, g_ab], [g_ab, g_bb]] F^-1 with F = [a b] are built as
    expressions, so first and second derivatives are exact.
    """

    frame: LatticeFrame
    g_aa: ScalarFieldExpr
    g_bb: ScalarFieldExpr
    g_ab: ScalarFieldExpr
    phi: ScalarFieldExpr | None

    def __init__(
        self,
        frame: LatticeFrame,
        g_aa: ScalarFieldExpr,
        g_bb: ScalarFieldExpr,
        g_ab: ScalarFieldExpr,
        phi: ScalarFieldExpr | None = None,
        chart_components: tuple[ScalarFieldExpr, ScalarFieldExpr, ScalarFieldExpr] | None = None,
    ) -> None:
        self.frame = frame
        self.g_aa = g_aa
        self.g_bb = g_bb
        self.g_ab = g_ab
        self.phi = phi

        if chart_components is not None:
            self.g11, self.g22, self.g12 = chart_components
            return

        inverse = np.linalg.inv(frame.matrix)
        p, q, r, s = (float(value) for value in inverse.ravel())
        # G_ij = sum_kl inverse[k, i] * frame_coefficient[k, l] * inverse[l, j]
        self.g11 = p * p * g_aa + 2 * p * r * g_ab + r * r * g_bb
        self.g22 = q * q * g_aa + 2 * q * s * g_ab + s * s * g_bb
        self.g12 = p * q * g_aa + (p * s + q * r) * g_ab + r * s * g_bb

    @staticmethod
    def from_chart(
        frame: LatticeFrame,
        g11: ScalarFieldExpr,
        g22: ScalarFieldExpr,
        g12: ScalarFieldExpr,
        phi: ScalarFieldExpr | None = None,
    ) -> "MetricField":
        """Build a metric from chart-basis components."""
        ax, bx, ay, by = (float(value) for value in frame.matrix.ravel())
        g_aa = ax * ax * g11 + 2 * ax * ay * g12 + ay * ay * g22
        g_bb = bx * bx * g11 + 2 * bx * by * g12 + by * by * g22
        g_ab = ax * bx * g11 + (ax * by + ay * bx) * g12 + ay * by * g22
        return MetricField(frame, g_aa, g_bb, g_ab, phi, (g11, g22, g12))

    @staticmethod
    def euclidean(frame: LatticeFrame) -> "MetricField":
        """The chart metric G = I."""
        one = ScalarFieldExpr.constant(1.0)
        zero = ScalarFieldExpr.constant(0.0)
        return MetricField.from_chart(frame, one, one, zero, one)

    @staticmethod
    def conformal(frame: LatticeFrame, phi: ScalarFieldExpr) -> "MetricField":
        """The metric G = phi^2 I in the chart, with phi > 0."""
        square = phi * phi
        zero = ScalarFieldExpr.constant(0.0)
        return MetricField.from_chart(frame, square, square, zero, phi)

    @property
    def is_conformal(self) -> bool:
        return self.phi is not None

    @functools.cached_property
    def _components(self) -> tuple[ScalarFieldExpr, ScalarFieldExpr, ScalarFieldExpr]:
        return (self.g11, self.g12, self.g22)

    @functools.cached_property
    def _gradient_components(self) -> list[tuple[ScalarFieldExpr, ...]]:
        return [
            tuple(
                ScalarFieldExpr.from_ast(component.gradient_ast[index])
                for component in self._components
            )
            for index in range(2)
        ]

    def tensor(self, points: npt.ArrayLike) -> FloatArray:
        """G at each point of a (..., 2) array; shape (..., 2, 2)."""
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        shape = x.shape
        g11, g12, g22 = (
            np.broadcast_to(component.evaluate(x, y), shape) for component in self._components
        )
        return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)

    def tensor_gradient(self, points: npt.ArrayLike) -> FloatArray:
        """Partial derivatives of G; shape (..., 2, 2, 2) indexed [..., k, i, j] = d_k G_ij."""
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        shape = x.shape
        parts = []
        for components in self._gradient_components:
            values = [np.broadcast_to(component.evaluate(x, y), shape) for component in components]
            g11, g12, g22 = values
            parts.append(np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2))
        return np.stack(parts, -3)

    def frame_coefficients(
        self, points: npt.ArrayLike
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        """(g_aa, g_bb, g_ab) at each point."""
        points = np.asarray(points, dtype=float)
        x = points[..., 0]
        y = points[..., 1]
        shape = x.shape
        return tuple(  # type: ignore[return-value]
            np.broadcast_to(np.asarray(expr.evaluate(x, y), dtype=float), shape)
            for expr in (self.g_aa, self.g_bb, self.g_ab)
        )

    def sqrt_det(self, points: npt.ArrayLike) -> FloatArray:
        """The volume density sqrt(det G) in chart coordinates."""
        return np.sqrt(np.linalg.det(self.tensor(points)))

    def nu(self, points: npt.ArrayLike) -> FloatArray:
        """sqrt(g_aa g_bb - g_ab^2), the g-area of the frame parallelogram."""
        g_aa, g_bb, g_ab = self.frame_coefficients(points)
        return np.sqrt(g_aa * g_bb - g_ab * g_ab)

    def norm(self, points: npt.ArrayLike, vectors: npt.ArrayLike) -> FloatArray:
        """|v|_g at each point for chart vectors v."""
        vectors = np.asarray(vectors, dtype=float)
        metric = self.tensor(points)
        return np.sqrt(np.einsum("...i,...ij,...j->...", vectors, metric, vectors))

    def axis_lengths(self, points: npt.ArrayLike) -> FloatArray:
        """(|a|_g, |b|_g, |c|_g) at each point; shape (..., 3)."""
        g_aa, g_bb, g_ab = self.frame_coefficients(points)
        g_cc = g_aa + g_bb + 2 * g_ab
        return np.sqrt(np.stack([g_aa, g_bb, g_cc], -1))

    def check_spd(self, chart: Chart, count: int = Constants.SPD_GRID) -> None:
        """Verify G is SPD on a count x count grid over the chart.

        Raises:
            MetricException: If an eigenvalue is at or below the SPD tolerance, or not finite
        """
        points = chart.grid(count)
        metric = self.tensor(points)
        eigenvalues = np.linalg.eigvalsh(metric)
        bad = ~np.all(np.isfinite(eigenvalues) & (eigenvalues > Constants.SPD_TOLERANCE), -1)
        if np.any(bad):
            where = points[np.argmax(bad)]
            raise MetricException(
                f"Metric is not positive definite at ({where[0]:.6g}, {where[1]:.6g})"
            )

    def __repr__(self) -> str:
        return f"MetricField<g_aa={self.g_aa}, g_bb={self.g_bb}, g_ab={self.g_ab}>"


class FiberMap(NamedTuple):
    """A linear map A: T_pM -> R^2 in chart coordinates, tagged with its base point."""

    base_point: tuple[float, float]
    matrix: FloatArray


class ExpPoint(NamedTuple):
    """Result of the exponential map: the point and whether it stayed in the chart."""

    point: FloatArray
    inside: bool


def exp_connection(p: npt.ArrayLike, v: npt.ArrayLike, chart: Chart | None = None) -> ExpPoint:
    """The exponential map of the chart's trivial connection: p + v."""
    point = np.asarray(p, dtype=float) + np.asarray(v, dtype=float)
    inside = True if chart is None else bool(np.all(chart.contains(point)))
    return ExpPoint(point, inside)


def parallel_transport(p: npt.ArrayLike, q: npt.ArrayLike, v: npt.ArrayLike) -> FloatArray:
    """Parallel transport from p to q; the identity on chart components."""
    del p, q
    return np.array(v, dtype=float)


def conformal_transport(
    p: npt.ArrayLike, q: npt.ArrayLike, v: npt.ArrayLike, phi: ScalarFieldExpr
) -> FloatArray:
    """Transport from p to q of the connection whose parallel frame is (a / phi, b / phi).

    Raises:
        MetricException: If phi is not positive at p or q
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    phi_p = phi.evaluate(p[..., 0], p[..., 1])
    phi_q = phi.evaluate(q[..., 0], q[..., 1])
    if np.any(np.asarray(phi_p) <= 0) or np.any(np.asarray(phi_q) <= 0):
        raise MetricException(f"Conformal factor must be positive, got {phi_p} and {phi_q}")
    ratio = np.asarray(phi_p / phi_q, dtype=float)
    return np.asarray(v, dtype=float) * ratio[..., None]


def exp_triangle_closure(p: npt.ArrayLike, v: npt.ArrayLike, w: npt.ArrayLike) -> bool:
    """Whether exp(p, w) equals exp(q, transport(w - v)) with q = exp(p, v)."""
    q = exp_connection(p, v).point
    r = exp_connection(p, w).point
    closing = exp_connection(q, parallel_transport(p, q, np.subtract(w, v))).point
    return bool(np.allclose(r, closing, rtol=0.0, atol=1e-12))


def gauss_legendre(count: int) -> tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if count < 1:
        raise ValueError(f"Quadrature needs at least one node, got {count}")
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return (nodes + 1) / 2, weights / 2


def segment_lengths(
    starts: npt.ArrayLike, vectors: npt.ArrayLike, g: MetricField, n_quad: int = 8
) -> FloatArray:
    """g-lengths of the straight chart segments p + t v, t in [0, 1], for stacks of (p, v)."""
    starts = np.asarray(starts, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    nodes, weights = gauss_legendre(n_quad)
    points = starts[..., None, :] + nodes[:, None] * vectors[..., None, :]
    metric = g.tensor(points)
    speed = np.einsum("...i,...kij,...j->...k", vectors, metric, vectors)
    return np.sqrt(np.maximum(speed, 0.0)) @ weights


def segment_length(
    p: npt.ArrayLike,
    v: npt.ArrayLike,
    g: MetricField,
    n_quad: int = 8,
    chart: Chart | None = None,
) -> float:
    """Length of the geodesic segment t -> p + t v by Gauss-Legendre quadrature.

    Args:
        p: Start point
        v: Chart tangent vector
        g: The metric
        n_quad: Number of quadrature nodes, at least 2
        chart: When given, the segment must stay inside it

    Raises:
        ValueError: If n_quad < 2
        ChartDomainException: If the segment leaves the chart
    """
    if n_quad < 2:
        raise ValueError(f"n_quad must be at least 2, got {n_quad}")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if chart is not None and not (chart.contains(p) and chart.contains(p + v)):
        raise ChartDomainException(f"Segment from {p.tolist()} along {v.tolist()} leaves {chart}")
    return float(segment_lengths(p, v, g, n_quad))


@dataclasses.dataclass(frozen=True)
class DistanceOptions:
    """Polyline relaxation settings for riemannian_distance."""

    nodes: int = 33
    tolerance: float = 1e-10
    max_iterations: int = 500
    n_quad: int = 4
    fast: bool = False

    def __post_init__(self) -> None:
        if self.nodes < 2:
            raise ValueError(f"A polyline needs at least 2 nodes, got {self.nodes}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


class DistanceResult(NamedTuple):
    """Minimized polyline lengths and whether the relaxation met its tolerance."""

    distances: FloatArray
    converged: bool
    iterations: int


def _polyline_length_and_gradient(
    nodes: FloatArray, g: MetricField, weights: FloatArray, quad_nodes: FloatArray
) -> tuple[float, FloatArray]:
    """Total length of (B, m, 2) polylines and its gradient in the node positions."""
    starts = nodes[:, :-1]
    vectors = nodes[:, 1:] - starts
    t = quad_nodes[:, None]
    points = starts[:, :, None, :] + t * vectors[:, :, None, :]
    metric = g.tensor(points)
    metric_gradient = g.tensor_gradient(points)

    g_v = np.einsum("bskij,bsj->bski", metric, vectors)
    speed2 = np.einsum("bsi,bski->bsk", vectors, g_v)
    speed = np.sqrt(np.maximum(speed2, 0.0))
    h = np.einsum("bsi,bsklij,bsj->bskl", vectors, metric_gradient, vectors)

    inverse = np.divide(1.0, 2 * speed, out=np.zeros_like(speed), where=speed > 0)
    wk = weights * inverse
    d_start = np.einsum("bsk,bskl->bsl", wk, -2 * g_v + (1 - t) * h)
    d_end = np.einsum("bsk,bskl->bsl", wk, 2 * g_v + t * h)

    gradient = np.zeros_like(nodes)
    gradient[:, :-1] += d_start
    gradient[:, 1:] += d_end
    gradient[:, 0] = 0.0
    gradient[:, -1] = 0.0
    return float(np.sum(speed @ weights)), gradient


def riemannian_distances(
    ps: npt.ArrayLike,
    qs: npt.ArrayLike,
    g: MetricField,
    options: DistanceOptions | None = None,
) -> DistanceResult:
    """Approximate g-distances between many point pairs by one polyline relaxation.

    Every straight segment p -> q is subdivided into options.nodes nodes; the interior nodes of all
    polylines are relaxed together by L-BFGS on the summed length.
    """
    options = options or DistanceOptions()
    ps = np.atleast_2d(np.asarray(ps, dtype=float))
    qs = np.atleast_2d(np.asarray(qs, dtype=float))
    if ps.shape != qs.shape:
        raise ValueError(f"Endpoint arrays differ in shape: {ps.shape} vs {qs.shape}")

    if options.fast or options.nodes == 2:
        lengths = segment_lengths(ps, qs - ps, g, max(options.n_quad, 8))
        return DistanceResult(lengths, True, 0)

    quad_nodes, weights = gauss_legendre(options.n_quad)
    fractions = np.linspace(0.0, 1.0, options.nodes)
    initial = ps[:, None, :] + fractions[None, :, None] * (qs - ps)[:, None, :]
    shape = initial.shape

    def objective(flat: FloatArray) -> tuple[float, FloatArray]:
        length, gradient = _polyline_length_and_gradient(
            flat.reshape(shape), g, weights, quad_nodes
        )
        return length, gradient.ravel()

    result = lbfgs_minimize(
        objective,
        initial.ravel(),
        LbfgsOptions(
            max_iterations=options.max_iterations,
            relative_tolerance=options.tolerance,
            gradient_tolerance=Constants.RELAXATION_GRADIENT * math.sqrt(initial.size),
        ),
    )
    # A stalled line search at a stationary polyline is convergence in floating point.
    converged = result.converged or (
        result.line_search_failed and result.gradient_norm <= Constants.STALL_GRADIENT
    )
    relaxed = result.x.reshape(shape)
    vectors = relaxed[:, 1:] - relaxed[:, :-1]
    lengths = np.sum(segment_lengths(relaxed[:, :-1], vectors, g, options.n_quad), axis=-1)
    if not converged:
        Log.warning(
            f"Distance relaxation stopped after {result.iterations} iterations without meeting "
            f"the tolerance {options.tolerance}"
        )
    return DistanceResult(lengths, converged, result.iterations)


def riemannian_distance(
    p: npt.ArrayLike,
    q: npt.ArrayLike,
    g: MetricField,
    options: DistanceOptions | None = None,
) -> float:
    """Approximate g-distance between p and q (see riemannian_distances)."""
    return float(riemannian_distances([p], [q], g, options).distances[0])


def gauss_curvature(g: MetricField, points: npt.ArrayLike) -> FloatArray | float:
    """Gauss curvature by Brioschi's formula from the chart components and their derivatives.

    Raises:
        MetricException: If E G - F^2 vanishes at a point
    """
    points = np.asarray(points, dtype=float)
    x = points[..., 0]
    y = points[..., 1]

    def values(expr: ScalarFieldExpr) -> FloatArray:
        return np.broadcast_to(np.asarray(expr.evaluate(x, y), dtype=float), x.shape)

    def partial(expr: ScalarFieldExpr, index: int) -> ScalarFieldExpr:
        return ScalarFieldExpr.from_ast(expr.gradient_ast[index])

    e_expr, f_expr, g_expr = g.g11, g.g12, g.g22
    e, f, gg = values(e_expr), values(f_expr), values(g_expr)
    e_u, e_v = values(partial(e_expr, 0)), values(partial(e_expr, 1))
    f_u, f_v = values(partial(f_expr, 0)), values(partial(f_expr, 1))
    g_u, g_v = values(partial(g_expr, 0)), values(partial(g_expr, 1))
    e_vv = values(partial(partial(e_expr, 1), 1))
    f_uv = values(partial(partial(f_expr, 0), 1))
    g_uu = values(partial(partial(g_expr, 0), 0))

    denominator = e * gg - f * f
    if np.any(np.abs(denominator) <= Constants.SPD_TOLERANCE):
        raise MetricException("Metric is degenerate where curvature was requested")

    first = np.stack(
        [
            np.stack([-e_vv / 2 + f_uv - g_uu / 2, e_u / 2, f_u - e_v / 2], -1),
            np.stack([f_v - g_u / 2, e, f], -1),
            np.stack([g_v / 2, f, gg], -1),
        ],
        -2,
    )
    zero = np.zeros_like(e)
    second = np.stack(
        [
            np.stack([zero, e_v / 2, g_u / 2], -1),
            np.stack([e_v / 2, e, f], -1),
            np.stack([g_u / 2, f, gg], -1),
        ],
        -2,
    )
    curvature = (np.linalg.det(first) - np.linalg.det(second)) / denominator**2
    return float(curvature) if curvature.ndim == 0 else curvature


def conformal_residual(g: MetricField, samples: npt.ArrayLike) -> float:
    """Max deviation of G / tr G over the samples from its value at the first sample."""
    metric = g.tensor(samples)
    shape = metric / (metric[..., 0, 0] + metric[..., 1, 1])[..., None, None]
    reference = shape.reshape(-1, 2, 2)[0]
    return float(np.max(np.abs(shape - reference)))


def conformal_factor(g: MetricField, reference: npt.ArrayLike = (0.0, 0.0)) -> ScalarFieldExpr:
    """phi = sqrt(tr G / tr G(reference)) for a conformal metric, as an expression."""
    if g.phi is not None:
        return g.phi
    reference = np.asarray(reference, dtype=float)
    trace = g.g11 + g.g22
    base = float(trace.evaluate(reference[0], reference[1]))
    if base <= 0:
        raise MetricException(f"Metric trace is not positive at {reference.tolist()}")
    return (trace / base).sqrt()


# Fiber algebra. Matrices may be stacked as (..., 2, 2) with matching stacks of metrics.


def metric_sqrt(metric: npt.ArrayLike) -> FloatArray:
    """G^(1/2) for (a stack of) SPD matrices.

    Raises:
        MetricException: If a matrix is not positive definite
    """
    metric = np.asarray(metric, dtype=float)
    det = np.linalg.det(metric)
    trace = metric[..., 0, 0] + metric[..., 1, 1]
    if np.any(det <= Constants.SPD_TOLERANCE**2) or np.any(trace <= 0):
        raise MetricException("Degenerate metric in fiber computation")
    return _spd_sqrt(metric)


def metric_inverse_sqrt(metric: npt.ArrayLike) -> FloatArray:
    """G^(-1/2) for (a stack of) SPD matrices."""
    return _inverse_2x2(metric_sqrt(metric))


def normalized(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray:
    """B = A G^(-1/2), the map expressed against a g-orthonormal basis."""
    return np.asarray(a, dtype=float) @ metric_inverse_sqrt(metric)


class SingularValues(NamedTuple):
    """Singular values sigma1 >= sigma2 >= 0 of B = A G^(-1/2) and the sign of det A."""

    sigma1: FloatArray | float
    sigma2: FloatArray | float
    det_sign: FloatArray | float


def _singular_values(b: FloatArray) -> SingularValues:
    even = (b[..., 0, 0] + b[..., 1, 1]) / 2
    odd = (b[..., 0, 0] - b[..., 1, 1]) / 2
    sym = (b[..., 1, 0] + b[..., 0, 1]) / 2
    skew = (b[..., 1, 0] - b[..., 0, 1]) / 2
    rotation_part = np.hypot(even, skew)
    reflection_part = np.hypot(odd, sym)
    det = b[..., 0, 0] * b[..., 1, 1] - b[..., 0, 1] * b[..., 1, 0]
    sigma1 = rotation_part + reflection_part
    sigma2 = np.abs(rotation_part - reflection_part)
    if np.ndim(sigma1) == 0:
        return SingularValues(float(sigma1), float(sigma2), float(np.sign(det)))
    return SingularValues(sigma1, sigma2, np.sign(det))


def singular_values_g(a: npt.ArrayLike, metric: npt.ArrayLike) -> SingularValues:
    """Closed-form singular values of A with respect to the metric G at its base point."""
    return _singular_values(normalized(a, metric))


def fiber_norm(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray | float:
    """Frobenius norm of A with respect to g and the Euclidean target metric."""
    b = normalized(a, metric)
    value = np.sqrt(np.sum(b * b, axis=(-2, -1)))
    return float(value) if np.ndim(value) == 0 else value


def dist_squared_to_O(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray | float:  # noqa: N802
    """dist^2(A, O(g, e)) = (sigma1 - 1)^2 + (sigma2 - 1)^2."""
    sigma1, sigma2, _ = singular_values_g(a, metric)
    return (sigma1 - 1) ** 2 + (sigma2 - 1) ** 2


def dist_squared_to_SO(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray | float:  # noqa: N802
    """dist^2(A, SO(g, e)); the smaller singular value flips sign when det A < 0."""
    sigma1, sigma2, det_sign = singular_values_g(a, metric)
    reflected = np.where(np.asarray(det_sign) < 0, -1.0, 1.0)
    value = (sigma1 - 1) ** 2 + (sigma2 - reflected) ** 2
    return float(value) if np.ndim(value) == 0 else value


def dist_to_O(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray | float:  # noqa: N802
    """Distance from A to the g-isometries O(g, e)."""
    return np.sqrt(dist_squared_to_O(a, metric))


def dist_to_SO(a: npt.ArrayLike, metric: npt.ArrayLike) -> FloatArray | float:  # noqa: N802
    """Distance from A to the orientation preserving g-isometries SO(g, e)."""
    return np.sqrt(dist_squared_to_SO(a, metric))


def isometry(metric: npt.ArrayLike, theta: float = 0.0, reflect: bool = False) -> FloatArray:
    """An element R G^(1/2) of SO(g, e), or of O(g, e) \\ SO(g, e) when reflect is set."""
    r = rotation(theta)
    if reflect:
        r = r @ np.diag([1.0, -1.0])
    return r @ metric_sqrt(metric)


def metric_rotation(metric: npt.ArrayLike, theta: float) -> FloatArray:
    """The g-rotation G^(-1/2) R(theta) G^(1/2) of the tangent plane."""
    return metric_inverse_sqrt(metric) @ rotation(theta) @ metric_sqrt(metric)
