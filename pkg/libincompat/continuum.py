"""Piecewise-affine extensions, continuum energy densities and the QW upper estimator."""

import dataclasses
import functools
import math
from typing import Any, ClassVar, Literal

import numpy as np
import numpy.typing as npt

from libincompat.energy import Laws
from libincompat.exceptions import MeshException, SolverException
from libincompat.field_expr import ScalarFieldExpr, eval_gradient
from libincompat.geometry import (
    Chart,
    FiberMap,
    MetricField,
    conformal_factor,
    conformal_residual,
    conformal_transport,
    dist_squared_to_SO,
    fiber_norm,
    gauss_legendre,
    isometry,
    metric_rotation,
)
from libincompat.optimizer import LbfgsOptions, lbfgs_minimize
from libincompat.triangulation import (
    Ring,
    TriangleMeasures,
    Triangulation,
    locate,
    ring_vertices,
    triangle_rule,
)
from libincompat.utilities import FloatArray, Log, rotation, spawn_rngs, wedge


class Constants:
    """Defaults of the continuum routines."""

    DEGENERATE_AREA: ClassVar[float] = 1e-14
    QW_LEVEL: ClassVar[int] = 2
    QW_STARTS: ClassVar[int] = 8
    QW_START_SCALE: ClassVar[float] = 0.25
    QW_GRADIENT_TOLERANCE: ClassVar[float] = 1e-10
    QW_MAX_ITERATIONS: ClassVar[int] = 400
    SYMMETRY_TOLERANCE: ClassVar[float] = 1e-10
    CONFORMAL_TOLERANCE: ClassVar[float] = 1e-9
    LIMIT_NODES: ClassVar[int] = 32


def _inverse_2x2(matrix: FloatArray) -> tuple[FloatArray, FloatArray]:
    det = matrix[..., 0, 0] * matrix[..., 1, 1] - matrix[..., 0, 1] * matrix[..., 1, 0]
    adjugate = np.empty_like(matrix)
    adjugate[..., 0, 0] = matrix[..., 1, 1]
    adjugate[..., 1, 1] = matrix[..., 0, 0]
    adjugate[..., 0, 1] = -matrix[..., 0, 1]
    adjugate[..., 1, 0] = -matrix[..., 1, 0]
    return adjugate / det[..., None, None], det


def differentials(corners: FloatArray, values: FloatArray) -> FloatArray:
    """The constant differential of the affine interpolant on each triangle; (T, 2, 2).

    Solves A (q - p) = f(q) - f(p) and A (r - q) = f(r) - f(q).

    Raises:
        MeshException: If a triangle is degenerate
    """
    chart_sides = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 1]], axis=-1)
    value_sides = np.stack([values[:, 1] - values[:, 0], values[:, 2] - values[:, 1]], axis=-1)
    inverse, det = _inverse_2x2(chart_sides)
    if np.any(np.abs(det) <= Constants.DEGENERATE_AREA):
        raise MeshException(f"Triangle {int(np.argmin(np.abs(det)))} is degenerate")
    return value_sides @ inverse


@dataclasses.dataclass
class DeformationField:
    """The piecewise-affine extension of a configuration over its triangulation."""

    tri: Triangulation
    values: FloatArray
    differentials: FloatArray

    def evaluate(self, points: npt.ArrayLike) -> FloatArray:
        """F at chart points; points outside the mesh use the nearest triangle's affine map."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        triangles = locate(self.tri, points)
        anchors = self.tri.triangles[triangles, 0]
        offsets = points - self.tri.vertices[anchors]
        slopes = np.einsum("nij,nj->ni", self.differentials[triangles], offsets)
        return self.values[anchors] + slopes

    def fiber(self, triangle: int) -> FiberMap:
        """dF on one triangle, based at its centroid."""
        centroid = self.tri.corners[triangle].mean(axis=0)
        return FiberMap((float(centroid[0]), float(centroid[1])), self.differentials[triangle])


def affine_extend(tri: Triangulation, f: npt.ArrayLike) -> DeformationField:
    """Extend a configuration affinely over every triangle."""
    values = np.asarray(f, dtype=float)
    if values.shape != (tri.vertex_count, 2):
        raise ValueError(
            f"Configuration has shape {values.shape}, expected ({tri.vertex_count}, 2)"
        )
    return DeformationField(tri, values, differentials(tri.corners, values[tri.triangles]))


def det_fiber(a: npt.ArrayLike, points: npt.ArrayLike, g: MetricField) -> FloatArray | float:
    """Intrinsic determinant s A(a) ∧ A(b) / nu(p) of (stacks of) fiber maps.

    s is the handedness of the frame, so the identity has determinant +1 for either orientation.
    """
    a = np.asarray(a, dtype=float)
    frame = g.frame
    image_a = a @ np.asarray(frame.a)
    image_b = a @ np.asarray(frame.b)
    value = frame.handedness * wedge(image_a, image_b) / g.nu(points)
    return float(value) if np.ndim(value) == 0 else value


class ContinuumDensity:
    """The energy densities W (limit) and W_eps (per triangle) of a model."""

    g: MetricField
    laws: Laws

    def __init__(self, g: MetricField, laws: Laws) -> None:
        self.g = g
        self.laws = laws
        self.axes = g.frame.axes
        self.frame_area = abs(g.frame.area)
        self.handedness = g.frame.handedness

    def weights(self, points: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
        """(rho^u, |u|_g) at each point; each of shape (..., 3)."""
        lengths = self.g.axis_lengths(points)
        return lengths / lengths.sum(axis=-1, keepdims=True), lengths

    def limit(self, a: npt.ArrayLike, points: npt.ArrayLike) -> FloatArray:
        """W(A) = sum_u rho^u Phi(|A u| / |u|_g) + Psi(det A) at the given base points."""
        a = np.asarray(a, dtype=float)
        points = np.asarray(points, dtype=float)
        rho, lengths = self.weights(points)
        images = np.einsum("...ij,uj->...ui", a, self.axes)
        ratios = np.linalg.norm(images, axis=-1) / lengths
        bond = np.sum(rho * self.laws.bond.value(ratios), axis=-1)
        return bond + self.laws.volume.value(det_fiber(a, points, self.g))

    def limit_gradient(self, a: npt.ArrayLike, points: npt.ArrayLike) -> FloatArray:
        """dW/dA, shape (..., 2, 2); zero-length images contribute nothing."""
        a = np.asarray(a, dtype=float)
        points = np.asarray(points, dtype=float)
        rho, lengths = self.weights(points)
        images = np.einsum("...ij,uj->...ui", a, self.axes)
        norms = np.linalg.norm(images, axis=-1)
        ratios = norms / lengths
        scale = rho * self.laws.bond.derivative(ratios)
        scale = np.divide(scale, norms * lengths, out=np.zeros_like(scale), where=norms > 0)
        gradient = np.einsum("...u,...ui,uj->...ij", scale, images, self.axes)

        nu = self.g.nu(points)
        determinant = self.handedness * wedge(a @ self.axes[0], a @ self.axes[1]) / nu
        cofactor = np.stack(
            [
                np.stack([a[..., 1, 1], -a[..., 1, 0]], -1),
                np.stack([-a[..., 0, 1], a[..., 0, 0]], -1),
            ],
            -2,
        )
        slope = self.laws.volume.derivative(determinant) * self.frame_area / nu
        return gradient + slope[..., None, None] * cofactor

    def epsilon(
        self,
        a: npt.ArrayLike,
        rho: npt.ArrayLike,
        rescaled: npt.ArrayLike,
        nu_eps: npt.ArrayLike,
    ) -> FloatArray:
        """W_eps(A) = sum_u rho_eps^u Phi(|A u| / D_eps^u) + Psi(s A(a) ∧ A(b) / nu_eps)."""
        a = np.asarray(a, dtype=float)
        images = np.einsum("...ij,uj->...ui", a, self.axes)
        ratios = np.linalg.norm(images, axis=-1) / np.asarray(rescaled, dtype=float)
        bond = np.sum(np.asarray(rho) * self.laws.bond.value(ratios), axis=-1)
        signed = (
            self.handedness
            * wedge(images[..., 0, :], images[..., 1, :])
            / np.asarray(nu_eps, dtype=float)
        )
        return bond + self.laws.volume.value(signed)


def density_W(fiber: FiberMap, density: ContinuumDensity) -> float:  # noqa: N802
    """The limit density at the fiber's base point."""
    return float(density.limit(fiber.matrix, np.asarray(fiber.base_point)))


def density_W_eps(  # noqa: N802
    fiber: FiberMap, density: ContinuumDensity, measures: TriangleMeasures, triangle: int
) -> float:
    """The epsilon density with the stored measures of one triangle."""
    return float(
        density.epsilon(
            fiber.matrix,
            measures.rho[triangle],
            measures.rescaled[triangle],
            measures.nu_centroid[triangle],
        )
    )


def integral_energy(
    field: DeformationField,
    density: ContinuumDensity,
    measures: TriangleMeasures,
    mode: Literal["epsilon", "limit"] = "epsilon",
) -> float:
    """Integral of the density of dF over the mesh.

    In epsilon mode the density is constant per triangle and the result reproduces the discrete
    energy. In limit mode W is integrated with the degree 6 triangle rule.
    """
    if mode == "epsilon":
        values = density.epsilon(
            field.differentials, measures.rho, measures.rescaled, measures.nu_centroid
        )
        return float(np.sum(values * measures.mu))

    barycentric, weights = triangle_rule(6)
    corners = field.tri.corners
    points = np.einsum("kv,tvi->tki", barycentric, corners)
    values = density.limit(field.differentials[:, None], points) * density.g.sqrt_det(points)
    chart_area = np.abs(wedge(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])) / 2
    return float(np.sum(chart_area * (values @ weights)))


def sample_map(tri: Triangulation, fx: ScalarFieldExpr, fy: ScalarFieldExpr) -> FloatArray:
    """The restriction of the smooth map (fx, fy) to the vertices."""
    x = tri.vertices[:, 0]
    y = tri.vertices[:, 1]
    return np.stack(
        [
            np.broadcast_to(fx.evaluate(x, y), x.shape),
            np.broadcast_to(fy.evaluate(x, y), x.shape),
        ],
        axis=-1,
    ).astype(float)


def map_differential(fx: ScalarFieldExpr, fy: ScalarFieldExpr, points: npt.ArrayLike) -> FloatArray:
    """Exact dF of (fx, fy) at chart points; shape (..., 2, 2)."""
    points = np.asarray(points, dtype=float)
    x = points[..., 0]
    y = points[..., 1]
    rows = []
    for expr in (fx, fy):
        dx, dy = eval_gradient(expr, x, y)
        rows.append(np.stack([np.broadcast_to(dx, x.shape), np.broadcast_to(dy, x.shape)], -1))
    return np.stack(rows, -2)


def limit_energy(
    density: ContinuumDensity,
    chart: Chart,
    fx: ScalarFieldExpr,
    fy: ScalarFieldExpr,
    nodes: int = Constants.LIMIT_NODES,
) -> float:
    """Integral over the chart of W(dF) dVol_g by tensor Gauss-Legendre quadrature."""
    t, w = gauss_legendre(nodes)
    xs = chart.x0 + chart.width * t
    ys = chart.y0 + chart.height * t
    mesh_x, mesh_y = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([mesh_x, mesh_y], axis=-1)
    values = density.limit(map_differential(fx, fy, points), points) * density.g.sqrt_det(points)
    return float(chart.width * chart.height * (w @ values @ w))


def epsilon_deviation(
    tri: Triangulation,
    measures: TriangleMeasures,
    density: ContinuumDensity,
    fibers: npt.ArrayLike,
) -> float:
    """max over triangles of |W_eps(A_T) - W(A_T)| / (1 + |A_T|^2) for one fiber per triangle."""
    fibers = np.asarray(fibers, dtype=float)
    centroids = tri.centroids
    eps_values = density.epsilon(fibers, measures.rho, measures.rescaled, measures.nu_centroid)
    limit_values = density.limit(fibers, centroids)
    norms = fiber_norm(fibers, density.g.tensor(centroids))
    return float(np.max(np.abs(eps_values - limit_values) / (1 + np.asarray(norms) ** 2)))


def density_constants(
    density: ContinuumDensity, fibers: npt.ArrayLike, points: npt.ArrayLike
) -> tuple[float, float]:
    """Empirical (alpha_W, C_W): min W / dist^2(A, SO) and max W / (1 + |A|^2) over samples."""
    fibers = np.asarray(fibers, dtype=float)
    points = np.asarray(points, dtype=float)
    metric = density.g.tensor(points)
    values = density.limit(fibers, points)
    distance = np.asarray(dist_squared_to_SO(fibers, metric))
    norms = np.asarray(fiber_norm(fibers, metric))
    away = distance > 1e-8
    alpha = float(np.min(values[away] / distance[away])) if np.any(away) else math.inf
    return alpha, float(np.max(values / (1 + norms**2)))


def extend_to_ring(
    tri: Triangulation, f: npt.ArrayLike, ring: Ring | None = None
) -> tuple[Ring, FloatArray]:
    """Values on the ring around the mesh: the average of each ring point's mesh neighbours."""
    values = np.asarray(f, dtype=float)
    ring = ring or ring_vertices(tri)
    extended = np.array([values[neighbors].mean(axis=0) for neighbors in ring.neighbors])
    return ring, extended.reshape(-1, 2)


def extension_constant(tri: Triangulation, f: npt.ArrayLike) -> tuple[float, float]:
    """Sup and L2 growth of dF when the ring extension is added, as ratios to the mesh alone."""
    values = np.asarray(f, dtype=float)
    ring, ring_values = extend_to_ring(tri, values)
    inner = np.linalg.norm(differentials(tri.corners, values[tri.triangles]), axis=(-2, -1))
    edges = tri.corners[:, 1:] - tri.corners[:, :1]
    inner_area = np.abs(wedge(edges[:, 0], edges[:, 1])) / 2
    if len(ring.triangles) == 0:
        return 1.0, 1.0
    positions = np.concatenate([tri.vertices, ring.positions])
    combined = np.concatenate([values, ring_values])
    corners = positions[ring.triangles]
    outer = np.linalg.norm(differentials(corners, combined[ring.triangles]), axis=(-2, -1))
    outer_area = np.abs(wedge(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])) / 2
    inner_max = float(inner.max())
    sup_ratio = max(inner_max, float(outer.max())) / inner_max if inner_max > 0 else 1.0
    inner_l2 = float(np.sum(inner_area * inner**2))
    total_l2 = inner_l2 + float(np.sum(outer_area * outer**2))
    l2_ratio = math.sqrt(total_l2 / inner_l2) if inner_l2 > 0 else 1.0
    return sup_ratio, l2_ratio


@dataclasses.dataclass(frozen=True)
class DiscMesh:
    """A triangulated 12-gon inscribed in the closed unit disc, with nested refinements.

    parents[k] holds the two coarse vertices whose midpoint is vertex k (twice the same index for
    vertices inherited from the coarser level).
    """

    vertices: FloatArray
    triangles: npt.NDArray[np.int64]
    parents: npt.NDArray[np.int64]
    boundary: npt.NDArray[np.bool_]

    @functools.cached_property
    def interior(self) -> npt.NDArray[np.int64]:
        return np.flatnonzero(~self.boundary)

    @functools.cached_property
    def areas(self) -> FloatArray:
        corners = self.vertices[self.triangles]
        return np.abs(wedge(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])) / 2

    @functools.cached_property
    def barycentric_gradients(self) -> FloatArray:
        """Chart gradients of the three hat functions on each triangle; (T, 3, 2)."""
        corners = self.vertices[self.triangles]
        sides = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=-1)
        inverse, _ = _inverse_2x2(sides)
        second = inverse[:, 0]
        third = inverse[:, 1]
        return np.stack([-second - third, second, third], axis=1)

    def prolong(self, values: FloatArray) -> FloatArray:
        """Interpolate nodal values of the coarser level onto this level."""
        return (values[self.parents[:, 0]] + values[self.parents[:, 1]]) / 2


def _base_disc() -> DiscMesh:
    center = np.zeros((1, 2))
    inner = 0.5 * np.array(
        [[math.cos(k * math.pi / 3), math.sin(k * math.pi / 3)] for k in range(6)]
    )
    outer = np.array([[math.cos(k * math.pi / 6), math.sin(k * math.pi / 6)] for k in range(12)])
    vertices = np.concatenate([center, inner, outer])
    triangles = []
    for k in range(6):
        nxt = (k + 1) % 6
        triangles.append([0, 1 + k, 1 + nxt])
        triangles.append([1 + k, 7 + 2 * k, 7 + 2 * k + 1])
        triangles.append([1 + k, 7 + 2 * k + 1, 1 + nxt])
        triangles.append([1 + nxt, 7 + 2 * k + 1, 7 + (2 * k + 2) % 12])
    index = np.arange(len(vertices))
    boundary = np.zeros(len(vertices), dtype=bool)
    boundary[7:] = True
    return DiscMesh(
        vertices, np.array(triangles, dtype=np.int64), np.stack([index, index], -1), boundary
    )


def _refine(coarse: DiscMesh) -> DiscMesh:
    vertices = list(coarse.vertices)
    parents = [(k, k) for k in range(len(vertices))]
    boundary = list(coarse.boundary)
    midpoints: dict[tuple[int, int], int] = {}

    edge_count: dict[tuple[int, int], int] = {}
    for triangle in coarse.triangles:
        for side in range(3):
            key = tuple(sorted((int(triangle[side]), int(triangle[(side + 1) % 3]))))
            edge_count[key] = edge_count.get(key, 0) + 1  # type: ignore[index]

    def midpoint(p: int, q: int) -> int:
        key = (min(p, q), max(p, q))
        if key not in midpoints:
            midpoints[key] = len(vertices)
            vertices.append((coarse.vertices[p] + coarse.vertices[q]) / 2)
            parents.append(key)
            boundary.append(edge_count[key] == 1)
        return midpoints[key]

    triangles = []
    for p, q, r in coarse.triangles:
        pq, qr, rp = midpoint(int(p), int(q)), midpoint(int(q), int(r)), midpoint(int(r), int(p))
        triangles.extend([[p, pq, rp], [pq, q, qr], [rp, qr, r], [pq, qr, rp]])
    return DiscMesh(
        np.array(vertices),
        np.array(triangles, dtype=np.int64),
        np.array(parents, dtype=np.int64),
        np.array(boundary, dtype=bool),
    )


@functools.lru_cache(maxsize=8)
def disc_mesh(level: int) -> DiscMesh:
    """The disc mesh at a refinement level; level 1 has 24 triangles, each level 4x more."""
    if level < 1:
        raise ValueError(f"Disc mesh level must be at least 1, got {level}")
    if level == 1:
        return _base_disc()
    return _refine(disc_mesh(level - 1))


@dataclasses.dataclass
class QwEstimate:
    """Upper estimate of QW(A) with the W value and distance it is compared against."""

    value: float
    w_value: float
    dist2: float
    level_values: list[float]
    converged: bool
    failed: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "qw": self.value,
            "w": self.w_value,
            "dist2": self.dist2,
            "levels": self.level_values,
            "converged": self.converged,
            "failed": self.failed,
        }


def _canonical_rotation(a: FloatArray) -> FloatArray:
    """Rotate A on the target side so its closest Euclidean rotation is the identity."""
    theta = math.atan2(a[1, 0] - a[0, 1], a[0, 0] + a[1, 1])
    return rotation(-theta) @ a


def qw_upper_estimate(
    fiber: FiberMap,
    density: ContinuumDensity,
    mesh_level: int = Constants.QW_LEVEL,
    starts: int = Constants.QW_STARTS,
    seed: int = 0,
) -> QwEstimate:
    """Upper estimate of QW(A) at the fiber's base point.

    Minimizes the average of W(A + d phi) over the unit disc among piecewise-affine phi vanishing on
    the boundary. Level 1 starts from phi = 0 and from random fields scaled to |A|; every finer
    level starts from the prolonged coarse optimum, so the estimate never increases with the level
    and never exceeds W(A). A level whose optimum comes out above either bound is clamped with a
    warning.
    """
    if mesh_level < 1:
        raise ValueError(f"mesh_level must be at least 1, got {mesh_level}")
    if starts < 0:
        raise ValueError(f"starts must be non-negative, got {starts}")

    point = np.asarray(fiber.base_point, dtype=float)
    matrix = _canonical_rotation(np.asarray(fiber.matrix, dtype=float))
    w_value = float(density.limit(matrix, point))
    dist2 = float(dist_squared_to_SO(matrix, density.g.tensor(point)))
    options = LbfgsOptions(
        max_iterations=Constants.QW_MAX_ITERATIONS,
        gradient_tolerance=Constants.QW_GRADIENT_TOLERANCE,
        relative_tolerance=1e-14,
    )
    rng = np.random.default_rng(seed)
    scale = Constants.QW_START_SCALE * float(np.linalg.norm(matrix))

    best_phi: FloatArray | None = None
    level_values: list[float] = []
    converged = True
    for level in range(1, mesh_level + 1):
        mesh = disc_mesh(level)
        objective = _disc_objective(mesh, matrix, point, density)
        candidates: list[FloatArray] = []
        if best_phi is None:
            candidates.append(np.zeros((len(mesh.interior), 2)))
            candidates.extend(
                rng.uniform(-scale, scale, size=(len(mesh.interior), 2)) for _ in range(starts)
            )
        else:
            full = np.zeros((len(disc_mesh(level - 1).vertices), 2))
            full[disc_mesh(level - 1).interior] = best_phi
            candidates.append(mesh.prolong(full)[mesh.interior])

        best_value = math.inf
        for candidate in candidates:
            try:
                result = lbfgs_minimize(objective, candidate.ravel(), options)
            except SolverException as ex:
                Log.warning(f"QW start skipped: {ex}")
                continue
            if result.value < best_value:
                best_value = result.value
                best_phi = result.x.reshape(-1, 2)
                converged = result.converged
        if not math.isfinite(best_value):
            Log.warning("QW estimator failed on every start; returning W(A)")
            return QwEstimate(w_value, w_value, dist2, level_values, False, True)
        if level_values and best_value > level_values[-1]:
            Log.warning(
                f"QW level {level} optimum {best_value:.6e} exceeds level {level - 1} "
                f"value {level_values[-1]:.6e}; keeping the coarser value"
            )
            best_value = level_values[-1]
        level_values.append(best_value)

    value = level_values[-1]
    if value > w_value:
        Log.warning(f"QW estimate {value:.6e} exceeds W(A) = {w_value:.6e}; returning W(A)")
        value = w_value
    return QwEstimate(value, w_value, dist2, level_values, converged)


def _disc_objective(  # type: ignore[no-untyped-def]
    mesh: DiscMesh, matrix: FloatArray, point: FloatArray, density: ContinuumDensity
):
    weights = mesh.areas / mesh.areas.sum()
    gradients = mesh.barycentric_gradients
    count = len(mesh.vertices)

    def objective(flat: FloatArray) -> tuple[float, FloatArray]:
        phi = np.zeros((count, 2))
        phi[mesh.interior] = flat.reshape(-1, 2)
        fibers = matrix + np.einsum("tki,tkj->tij", phi[mesh.triangles], gradients)
        values = density.limit(fibers, point)
        dw = density.limit_gradient(fibers, point) * weights[:, None, None]
        nodal = np.zeros((count, 2))
        np.add.at(nodal, mesh.triangles, np.einsum("tij,tkj->tki", dw, gradients))
        return float(weights @ values), nodal[mesh.interior].ravel()

    return objective


@dataclasses.dataclass
class RigidityReport:
    """Ratios QW_est / dist^2(A, SO) over sampled fibers, per mesh level."""

    min_ratio: dict[int, float]
    near_zero: list[int]
    frame_difference: float
    estimates: list[list[QwEstimate]]

    def to_json(self) -> dict[str, Any]:
        return {
            "min_ratio": {str(level): value for level, value in self.min_ratio.items()},
            "near_zero": self.near_zero,
            "frame_difference": self.frame_difference,
        }


def sample_fibers(
    metric: FloatArray, count: int, rng: np.random.Generator, min_dist2: float = 0.1
) -> list[FloatArray]:
    """Random fiber maps R G^(1/2) (I + H) at squared distance at least min_dist2 from SO."""
    fibers: list[FloatArray] = []
    while len(fibers) < count:
        candidate = isometry(metric, float(rng.uniform(0, 2 * math.pi))) @ (
            np.eye(2) + rng.normal(scale=0.5, size=(2, 2))
        )
        if float(dist_squared_to_SO(candidate, metric)) >= min_dist2:
            fibers.append(candidate)
    return fibers


def rigidity_lower_check(
    density: ContinuumDensity,
    point: npt.ArrayLike,
    samples: int = 20,
    levels: tuple[int, ...] = (1, 2),
    seed: int = 0,
    near_zero: float = 1e-6,
) -> RigidityReport:
    """Empirical rigidity constant min QW_est / dist^2 and a frame indifference spot check."""
    point = np.asarray(point, dtype=float)
    metric = density.g.tensor(point)
    rng, rotation_rng = spawn_rngs(seed, 2)
    fibers = sample_fibers(metric, samples, rng)
    base = (float(point[0]), float(point[1]))

    min_ratio = {}
    flagged: set[int] = set()
    estimates = []
    for level in levels:
        row = [qw_upper_estimate(FiberMap(base, a), density, level, seed=seed) for a in fibers]
        estimates.append(row)
        ratios = [estimate.value / estimate.dist2 for estimate in row]
        min_ratio[level] = float(min(ratios))
        flagged.update(index for index, estimate in enumerate(row) if estimate.value < near_zero)

    difference = 0.0
    for index, a in enumerate(fibers[: min(5, len(fibers))]):
        turned = rotation(float(rotation_rng.uniform(0, 2 * math.pi))) @ a
        rotated = qw_upper_estimate(FiberMap(base, turned), density, levels[0], seed=seed)
        difference = max(difference, abs(rotated.value - estimates[0][index].value))

    return RigidityReport(min_ratio, sorted(flagged), difference, estimates)


@dataclasses.dataclass
class SymmetryReport:
    """Results of the conformal material-connection and pi/3 rotation checks."""

    conformal_residual: float
    skipped: bool
    transport_error: float = math.nan
    rotation_error: float = math.nan
    rotation_checked: bool = False

    def passed(self, tolerance: float = Constants.SYMMETRY_TOLERANCE) -> bool:
        if self.skipped:
            return False
        if self.transport_error > tolerance:
            return False
        return not self.rotation_checked or self.rotation_error <= tolerance

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _hexagonal_at(g: MetricField, point: FloatArray, tolerance: float = 1e-9) -> bool:
    g_aa, g_bb, g_ab = (float(v) for v in g.frame_coefficients(point))
    return abs(g_aa - g_bb) <= tolerance * g_aa and abs(g_ab + g_aa / 2) <= tolerance * g_aa


def conformal_symmetry_check(
    density: ContinuumDensity,
    chart: Chart,
    samples: int = 1000,
    seed: int = 0,
    tolerance: float = Constants.CONFORMAL_TOLERANCE,
) -> SymmetryReport:
    """Check W_q(A o transport_q^p) = W_p(A) and W_p(A o R_pi/3) = W_p(A) on random samples.

    The transport is the one of the material connection of a conformal metric. The rotation check
    runs only where the frame is g-hexagonal (equal lengths, angle 2 pi / 3).
    """
    g = density.g
    rng = np.random.default_rng(seed)
    grid = chart.grid(16)
    residual = conformal_residual(g, grid)
    if residual > tolerance:
        Log.info(f"Metric is not conformal (residual {residual:.3e}); symmetry check skipped")
        return SymmetryReport(residual, True)

    phi = conformal_factor(g, chart.center)
    lower = np.array([chart.x0, chart.y0])
    upper = np.array([chart.x1, chart.y1])
    ps = rng.uniform(lower, upper, size=(samples, 2))
    qs = rng.uniform(lower, upper, size=(samples, 2))
    fibers = rng.normal(size=(samples, 2, 2))

    # A o transport_q^p is A scaled by phi(q) / phi(p) as a map on T_q.
    ratios = conformal_transport(qs, ps, np.ones((samples, 2)), phi)[:, 0]
    transported = fibers * ratios[:, None, None]
    transport_error = float(
        np.max(np.abs(density.limit(transported, qs) - density.limit(fibers, ps)))
    )

    hexagonal = np.array([_hexagonal_at(g, p) for p in ps])
    rotation_error = math.nan
    if np.any(hexagonal):
        checked = ps[hexagonal]
        rotations = metric_rotation(g.tensor(checked), math.pi / 3)
        rotated = fibers[hexagonal] @ rotations
        original = density.limit(fibers[hexagonal], checked)
        rotation_error = float(np.max(np.abs(density.limit(rotated, checked) - original)))
    return SymmetryReport(residual, False, transport_error, rotation_error, bool(np.any(hexagonal)))

