"""The epsilon-scale hexagonal triangulation and its per-edge and per-triangle measures."""

import concurrent.futures
import dataclasses
import math
from typing import Callable, ClassVar, Final, NamedTuple, TypeVar

import numpy as np
import numpy.typing as npt

from libincompat.exceptions import MeshException
from libincompat.geometry import (
    Chart,
    DistanceOptions,
    LatticeFrame,
    MetricField,
    gauss_legendre,
    riemannian_distances,
    segment_lengths,
)
from libincompat.utilities import FloatArray, Log, wedge

AXIS_NAMES: Final[tuple[str, str, str]] = ("a", "b", "c")
PLUS: Final[int] = 1
MINUS: Final[int] = -1

# Lattice steps (di, dj) of the three axes: a = (1, 0), b = (0, 1), c = (-1, -1).
AXIS_STEPS: Final[tuple[tuple[int, int], ...]] = ((1, 0), (0, 1), (-1, -1))

# Degree 6 symmetric rule on the reference triangle; weights sum to one.
_DEGREE_SIX_ORBITS: Final[tuple[tuple[float, tuple[float, float, float]], ...]] = (
    (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
    (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
    (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
)

_T = TypeVar("_T")


def _expand_orbits() -> tuple[FloatArray, FloatArray]:
    points = []
    weights = []
    for weight, (l0, l1, l2) in _DEGREE_SIX_ORBITS:
        permutations = {
            (l0, l1, l2),
            (l1, l2, l0),
            (l2, l0, l1),
            (l0, l2, l1),
            (l2, l1, l0),
            (l1, l0, l2),
        }
        for permutation in sorted(permutations):
            points.append(permutation)
            weights.append(weight)
    weight_array = np.array(weights)
    return np.array(points), weight_array / weight_array.sum()


_QUADRATURE_RULES: Final[dict[int, tuple[FloatArray, FloatArray]]] = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
    6: _expand_orbits(),
}


def triangle_rule(degree: int) -> tuple[FloatArray, FloatArray]:
    """Barycentric points (k, 3) and weights (k,) of the lowest stored rule exact to degree.

    Raises:
        ValueError: If no stored rule reaches the degree
    """
    for stored in sorted(_QUADRATURE_RULES):
        if stored >= degree:
            return _QUADRATURE_RULES[stored]
    raise ValueError(f"No triangle rule of degree {degree}; the highest is 6")


class Constants:
    """Defaults for mesh construction and measures."""

    DEFAULT_OFFSET: ClassVar[tuple[float, float]] = (0.5, 0.5)
    QUADRATURE_DEGREE: ClassVar[int] = 6
    CLOSEST_EDGE_SAMPLES: ClassVar[int] = 2048
    TIE_TOLERANCE: ClassVar[float] = 1e-12
    CHUNK_SIZE: ClassVar[int] = 256
    DEFECT_NODES: ClassVar[int] = 48
    DENSITY_GRID: ClassVar[int] = 64


@dataclasses.dataclass
class Triangulation:
    """Vertices, edges and oriented triangles of the lattice inside the chart.

    Edges are stored as (p, q) with q = p + epsilon * u for their axis u. Triangles are stored as
    (p, q, r) with q - p = s epsilon a and r - q = s epsilon b, s being the orientation. signs holds
    the sign of the chart area (q - p) ∧ (r - q) of each stored triangle.
    """

    epsilon: float
    frame: LatticeFrame
    origin: FloatArray
    vertices: FloatArray
    lattice: npt.NDArray[np.int64]
    edges: npt.NDArray[np.int64]
    edge_axes: npt.NDArray[np.int64]
    triangles: npt.NDArray[np.int64]
    orientations: npt.NDArray[np.int64]
    triangle_edges: npt.NDArray[np.int64] = dataclasses.field(init=False)
    edge_triangle_count: npt.NDArray[np.int64] = dataclasses.field(init=False)
    boundary: npt.NDArray[np.bool_] = dataclasses.field(init=False)
    signs: FloatArray = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        edge_lookup = {
            (min(int(p), int(q)), max(int(p), int(q))): index
            for index, (p, q) in enumerate(self.edges)
        }
        triangle_edges = np.empty((len(self.triangles), 3), dtype=np.int64)
        for index, (p, q, r) in enumerate(self.triangles):
            for side, (start, end) in enumerate(((p, q), (q, r), (r, p))):
                key = (min(int(start), int(end)), max(int(start), int(end)))
                if key not in edge_lookup:
                    raise MeshException(f"Triangle {index} uses an edge missing from the edge list")
                triangle_edges[index, side] = edge_lookup[key]
        self.triangle_edges = triangle_edges
        self.edge_triangle_count = np.bincount(
            triangle_edges.ravel(), minlength=len(self.edges)
        ).astype(np.int64)
        boundary = np.zeros(len(self.vertices), dtype=bool)
        boundary[self.edges[self.edge_triangle_count == 1].ravel()] = True
        self.boundary = boundary
        corners = self.vertices[self.triangles]
        self.signs = np.sign(wedge(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 1]))
        self._edge_lookup = edge_lookup
        self._vertex_lookup = {
            (int(i), int(j)): index for index, (i, j) in enumerate(self.lattice)
        }
        self._cell_lookup = {}
        for index, (p, orientation) in enumerate(zip(self.triangles[:, 0], self.orientations)):
            i, j = self.lattice[p]
            # A minus triangle starts at the upper corner (i + 1, j + 1) of its cell.
            cell = (int(i), int(j)) if orientation == PLUS else (int(i) - 1, int(j) - 1)
            self._cell_lookup[(cell, int(orientation))] = index

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def corners(self) -> FloatArray:
        """Chart positions of the triangle vertices; shape (T, 3, 2)."""
        return self.vertices[self.triangles]

    @property
    def centroids(self) -> FloatArray:
        return self.corners.mean(axis=1)

    def edge_index(self, p: int, q: int) -> int:
        """The edge joining two vertices, in either order.

        Raises:
            MeshException: If the vertices are not adjacent
        """
        key = (min(p, q), max(p, q))
        if key not in self._edge_lookup:
            raise MeshException(f"Vertices {p} and {q} are not joined by an edge")
        return self._edge_lookup[key]

    def vertex_at(self, i: int, j: int) -> int | None:
        """Index of the vertex at lattice position (i, j), if it is in the mesh."""
        return self._vertex_lookup.get((i, j))

    def neighbors(self, vertex: int) -> list[int]:
        """Adjacent vertices in the order +a, +b, +c, -a, -b, -c (missing ones skipped)."""
        i, j = (int(v) for v in self.lattice[vertex])
        result = []
        for sign in (1, -1):
            for di, dj in AXIS_STEPS:
                other = self.vertex_at(i + sign * di, j + sign * dj)
                if other is None:
                    continue
                if (min(vertex, other), max(vertex, other)) in self._edge_lookup:
                    result.append(other)
        return result

    def lattice_coordinates(self, points: npt.ArrayLike) -> FloatArray:
        """Real lattice coordinates (s, t) with point = origin + epsilon (s a + t b)."""
        points = np.asarray(points, dtype=float)
        inverse = np.linalg.inv(self.frame.matrix)
        return ((points - self.origin) / self.epsilon) @ inverse.T

    def lattice_point(self, lattice: npt.ArrayLike) -> FloatArray:
        """Chart position of integer (or real) lattice coordinates."""
        lattice = np.asarray(lattice, dtype=float)
        return self.origin + self.epsilon * (lattice @ self.frame.matrix.T)

    def cell_triangle(self, i: int, j: int, orientation: int) -> int | None:
        """The + or - triangle of lattice cell (i, j), if it is in the mesh."""
        return self._cell_lookup.get(((i, j), orientation))

    def __str__(self) -> str:
        return (
            f"Triangulation<eps={self.epsilon}: {self.vertex_count} vertices, "
            f"{self.edge_count} edges, {self.triangle_count} triangles>"
        )

    def __repr__(self) -> str:
        return str(self)


def _lattice_range(
    chart: Chart, frame: LatticeFrame, origin: FloatArray, epsilon: float
) -> tuple[range, range]:
    inverse = np.linalg.inv(frame.matrix)
    corners = np.array(
        [[chart.x0, chart.y0], [chart.x1, chart.y0], [chart.x0, chart.y1], [chart.x1, chart.y1]]
    )
    coordinates = ((corners - origin) / epsilon) @ inverse.T
    low = np.floor(coordinates.min(axis=0)).astype(int) - 1
    high = np.ceil(coordinates.max(axis=0)).astype(int) + 1
    return range(low[0], high[0] + 1), range(low[1], high[1] + 1)


def build_lattice(
    chart: Chart,
    frame: LatticeFrame,
    g: MetricField | None,
    epsilon: float,
    offset: tuple[float, float] = Constants.DEFAULT_OFFSET,
) -> Triangulation:
    """Build the hexagonal triangulation at scale epsilon.

    Lattice points origin + epsilon (i a + j b), origin = lower-left corner + epsilon * offset, are
    intersected with the chart; exactly the triangles whose three corners lie in the chart are kept
    and vertices belonging to no kept triangle are dropped.

    Args:
        chart: The domain
        frame: Lattice directions a and b
        g: The metric; used only to log the density constant
        epsilon: Lattice scale
        offset: Lattice origin relative to the lower-left corner, in units of epsilon

    Returns:
        The triangulation, scanned row-major in (j, i)

    Raises:
        ValueError: If epsilon is not positive
        MeshException: If no triangle fits in the domain
    """

    if not epsilon > 0 or not math.isfinite(epsilon):
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    origin = np.array([chart.x0, chart.y0]) + epsilon * np.asarray(offset, dtype=float)
    i_range, j_range = _lattice_range(chart, frame, origin, epsilon)
    a = np.asarray(frame.a)
    b = np.asarray(frame.b)

    inside: set[tuple[int, int]] = set()
    for j in j_range:
        for i in i_range:
            point = origin + epsilon * (i * a + j * b)
            if chart.contains(point):
                inside.add((i, j))

    kept: list[tuple[tuple[int, int], tuple[int, int], tuple[int, int], int]] = []
    for j in j_range:
        for i in i_range:
            plus = ((i, j), (i + 1, j), (i + 1, j + 1))
            if all(corner in inside for corner in plus):
                kept.append((*plus, PLUS))
            minus = ((i + 1, j + 1), (i, j + 1), (i, j))
            if all(corner in inside for corner in minus):
                kept.append((*minus, MINUS))

    if not kept:
        raise MeshException(f"Domain {chart} is too small for epsilon {epsilon}")

    corners_used = {corner for triangle in kept for corner in triangle[:3]}
    used = sorted(corners_used, key=lambda c: (c[1], c[0]))
    vertex_index = {corner: index for index, corner in enumerate(used)}
    lattice = np.array(used, dtype=np.int64)
    vertices = origin + epsilon * (lattice[:, :1] * a + lattice[:, 1:] * b)

    triangles = np.array(
        [[vertex_index[p], vertex_index[q], vertex_index[r]] for p, q, r, _ in kept], dtype=np.int64
    )
    orientations = np.array([orientation for *_, orientation in kept], dtype=np.int64)

    edge_set: dict[tuple[int, int], int] = {}
    for p, q, r, _ in kept:
        for start, end in ((p, q), (q, r), (r, p)):
            step = (end[0] - start[0], end[1] - start[1])
            if step in AXIS_STEPS:
                axis = AXIS_STEPS.index(step)
                key = (vertex_index[start], vertex_index[end])
            else:
                axis = AXIS_STEPS.index((-step[0], -step[1]))
                key = (vertex_index[end], vertex_index[start])
            edge_set.setdefault(key, axis)
    ordered_edges = sorted(edge_set.items(), key=lambda item: (min(item[0]), max(item[0])))
    edges = np.array([key for key, _ in ordered_edges], dtype=np.int64)
    edge_axes = np.array([axis for _, axis in ordered_edges], dtype=np.int64)

    triangulation = Triangulation(
        epsilon=epsilon,
        frame=frame,
        origin=origin,
        vertices=vertices,
        lattice=lattice,
        edges=edges,
        edge_axes=edge_axes,
        triangles=triangles,
        orientations=orientations,
    )
    Log.debug(f"Built {triangulation}")
    if g is not None:
        lengths = g.axis_lengths(chart.grid(8))
        Log.debug(f"Density constant 2 max |u|_g = {2 * float(lengths.max()):.6g}")
    return triangulation


def _parallel_map(function: Callable[[slice], _T], count: int, threads: int) -> list[_T]:
    """Apply function to consecutive chunks of range(count), results in chunk order."""
    chunks = [
        slice(start, min(start + Constants.CHUNK_SIZE, count))
        for start in range(0, count, Constants.CHUNK_SIZE)
    ]
    if threads <= 1 or len(chunks) <= 1:
        return [function(chunk) for chunk in chunks]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, chunks))


def triangle_areas(
    g: MetricField,
    corners: npt.ArrayLike,
    degree: int = Constants.QUADRATURE_DEGREE,
    subdivisions: int = 1,
) -> FloatArray:
    """g-areas of chart triangles (..., 3, 2) by a symmetric triangle rule.

    Args:
        g: The metric
        corners: Triangle corners
        degree: Polynomial degree the rule integrates exactly
        subdivisions: Each triangle is split into subdivisions^2 congruent pieces first
    """
    corners = np.asarray(corners, dtype=float)
    if subdivisions < 1:
        raise ValueError(f"subdivisions must be at least 1, got {subdivisions}")
    barycentric, weights = triangle_rule(degree)
    pieces = _subdivision_barycentric(subdivisions)
    # Quadrature points of every piece, in barycentric coordinates of the whole triangle.
    points = np.einsum("pkv,qk->pqv", pieces, barycentric).reshape(-1, 3)
    point_weights = np.tile(weights, len(pieces)) / len(pieces)
    positions = np.einsum("nv,...vi->...ni", points, corners)
    chart_area = np.abs(
        wedge(corners[..., 1, :] - corners[..., 0, :], corners[..., 2, :] - corners[..., 0, :])
    ) / 2
    return chart_area * (g.sqrt_det(positions) @ point_weights)


def triangle_area(
    g: MetricField,
    corners: npt.ArrayLike,
    degree: int = Constants.QUADRATURE_DEGREE,
    subdivisions: int = 1,
) -> float:
    """g-area mu(p, q, r) of one chart triangle."""
    return float(triangle_areas(g, np.asarray(corners, dtype=float)[None], degree, subdivisions)[0])


def _subdivision_barycentric(count: int) -> FloatArray:
    """Corners of the count^2 pieces of a triangle in barycentric coordinates; (count^2, 3, 3)."""
    pieces = []
    for i in range(count):
        for j in range(count - i):
            up = [(i, j), (i + 1, j), (i, j + 1)]
            pieces.append(up)
            if i + j < count - 1:
                pieces.append([(i + 1, j), (i + 1, j + 1), (i, j + 1)])
    result = np.array(
        [[[1 - (i + j) / count, i / count, j / count] for i, j in piece] for piece in pieces]
    )
    return result


def _sample_points(n_sample: int) -> FloatArray:
    """Barycentric centroids of the pieces of an n x n subdivision, n = ceil(sqrt(n_sample))."""
    count = max(1, math.ceil(math.sqrt(n_sample)))
    return _subdivision_barycentric(count).mean(axis=1)


def _edge_distance_squared(
    points: FloatArray, start: FloatArray, end: FloatArray, metric: FloatArray
) -> FloatArray:
    """Squared distance in a frozen metric from points (T, S, 2) to segments (T, 2) -> (T, S)."""
    direction = end - start
    offset = points - start[:, None, :]
    metric_direction = np.einsum("tij,tj->ti", metric, direction)
    length2 = np.einsum("ti,ti->t", direction, metric_direction)
    t = np.clip(np.einsum("tsi,ti->ts", offset, metric_direction) / length2[:, None], 0.0, 1.0)
    residual = offset - t[..., None] * direction[:, None, :]
    return np.einsum("tsi,tij,tsj->ts", residual, metric, residual)


def closest_edge_fraction_array(
    g: MetricField, corners: npt.ArrayLike, n_sample: int = Constants.CLOSEST_EDGE_SAMPLES
) -> FloatArray:
    """Closest-edge relative areas (rho^a, rho^b, rho^c) for triangles (T, 3, 2); shape (T, 3).

    Side a joins corners 0 and 1, side b joins 1 and 2, side c joins 2 and 0. Samples are the
    centroids of a uniform subdivision, weighted by sqrt(det G); point-to-edge distances use the
    metric frozen at the triangle centroid; ties are shared equally.
    """
    corners = np.asarray(corners, dtype=float)
    barycentric = _sample_points(n_sample)
    points = np.einsum("sv,tvi->tsi", barycentric, corners)
    frozen = g.tensor(corners.mean(axis=1))
    weights = g.sqrt_det(points)

    distances = np.stack(
        [
            _edge_distance_squared(points, corners[:, start], corners[:, end], frozen)
            for start, end in ((0, 1), (1, 2), (2, 0))
        ],
        axis=-1,
    )
    nearest = distances.min(axis=-1, keepdims=True)
    scale = np.maximum(nearest, np.max(distances, axis=-1, keepdims=True))
    winners = distances <= nearest + Constants.TIE_TOLERANCE * scale
    shares = winners / winners.sum(axis=-1, keepdims=True)
    totals = np.einsum("ts,tsk->tk", weights, shares)
    return totals / totals.sum(axis=-1, keepdims=True)


def closest_edge_fractions(
    g: MetricField, corners: npt.ArrayLike, n_sample: int = Constants.CLOSEST_EDGE_SAMPLES
) -> tuple[float, float, float]:
    """(rho^a, rho^b, rho^c) of one triangle."""
    fractions = closest_edge_fraction_array(g, np.asarray(corners, dtype=float)[None], n_sample)[0]
    return (float(fractions[0]), float(fractions[1]), float(fractions[2]))


def rescaled_distances(
    g: MetricField,
    corners: npt.ArrayLike,
    epsilon: float,
    options: DistanceOptions | None = None,
) -> tuple[float, float, float]:
    """(D^a, D^b, D^c): g-distances between consecutive corners divided by epsilon."""
    corners = np.asarray(corners, dtype=float)
    starts = corners[[0, 1, 2]]
    ends = corners[[1, 2, 0]]
    distances = riemannian_distances(starts, ends, g, options).distances / epsilon
    return (float(distances[0]), float(distances[1]), float(distances[2]))


@dataclasses.dataclass(frozen=True)
class MeasureOptions:
    """Settings for compute_measures."""

    quadrature_degree: int = Constants.QUADRATURE_DEGREE
    subdivisions: int = 1
    n_sample: int = Constants.CLOSEST_EDGE_SAMPLES
    distance: DistanceOptions = dataclasses.field(default_factory=DistanceOptions)
    threads: int = 1


@dataclasses.dataclass
class TriangleMeasures:
    """Per-triangle and per-edge measures of a triangulation.

    mu: g-area of each triangle; nu_centroid: nu at each centroid; rho: closest-edge fractions
    (T, 3); distances: g-distance along each edge; rescaled: D = distance / epsilon per triangle
    side (T, 3); mu_edge: the edge weights.
    """

    mu: FloatArray
    nu_centroid: FloatArray
    rho: FloatArray
    distances: FloatArray
    rescaled: FloatArray
    mu_edge: FloatArray

    @property
    def total_area(self) -> float:
        return float(np.sum(self.mu))


def compute_measures(
    tri: Triangulation, g: MetricField, options: MeasureOptions | None = None
) -> TriangleMeasures:
    """Compute all measures of a triangulation; chunks may run on several threads.

    Raises:
        MeshException: If a triangle is degenerate or an edge has zero length
    """
    options = options or MeasureOptions()
    corners = tri.corners

    def areas(chunk: slice) -> FloatArray:
        return triangle_areas(g, corners[chunk], options.quadrature_degree, options.subdivisions)

    def fractions(chunk: slice) -> FloatArray:
        return closest_edge_fraction_array(g, corners[chunk], options.n_sample)

    def distances(chunk: slice) -> FloatArray:
        edges = tri.edges[chunk]
        return riemannian_distances(
            tri.vertices[edges[:, 0]], tri.vertices[edges[:, 1]], g, options.distance
        ).distances

    mu = np.concatenate(_parallel_map(areas, tri.triangle_count, options.threads))
    if np.any(mu <= 0):
        raise MeshException(f"Triangle {int(np.argmin(mu))} has no area")
    rho = np.concatenate(_parallel_map(fractions, tri.triangle_count, options.threads))
    edge_distances = np.concatenate(_parallel_map(distances, tri.edge_count, options.threads))
    if np.any(edge_distances <= 0):
        raise MeshException(f"Edge {int(np.argmin(edge_distances))} has zero length")

    nu_centroid = g.nu(tri.centroids)
    rescaled = edge_distances[tri.triangle_edges] / tri.epsilon

    mu_edge = np.zeros(tri.edge_count)
    np.add.at(mu_edge, tri.triangle_edges.ravel(), (rho * mu[:, None]).ravel())

    Log.debug(f"Measures of {tri}: total area {float(mu.sum()):.6g}")
    return TriangleMeasures(mu, nu_centroid, rho, edge_distances, rescaled, mu_edge)


def edge_weight(tri: Triangulation, measures: TriangleMeasures, edge: int) -> float:
    """mu(p, q): the sum of rho^axis * mu over the triangles sharing the edge.

    Raises:
        MeshException: If no triangle contains the edge
    """
    if tri.edge_triangle_count[edge] == 0:
        raise MeshException(f"Edge {edge} is dangling")
    sides = tri.triangle_edges == edge
    return float(np.sum((measures.rho * measures.mu[:, None])[sides]))


def chart_volume(g: MetricField, chart: Chart, nodes: int = Constants.DEFECT_NODES) -> float:
    """Vol_g of the chart rectangle by tensor Gauss-Legendre quadrature."""
    t, w = gauss_legendre(nodes)
    xs = chart.x0 + chart.width * t
    ys = chart.y0 + chart.height * t
    mesh_x, mesh_y = np.meshgrid(xs, ys, indexing="ij")
    density = g.sqrt_det(np.stack([mesh_x, mesh_y], axis=-1))
    return float(chart.width * chart.height * (w @ density @ w))


def coverage_defect(
    chart: Chart,
    tri: Triangulation,
    g: MetricField,
    measures: TriangleMeasures | None = None,
) -> float:
    """Vol_g(M) - sum of triangle g-areas."""
    mu = measures.mu if measures is not None else triangle_areas(g, tri.corners)
    return chart_volume(g, chart) - float(np.sum(mu))


def density_radius(
    chart: Chart, tri: Triangulation, g: MetricField, count: int = Constants.DENSITY_GRID
) -> float:
    """Max over a grid of the g-length of the straight segment to the nearest vertex."""
    points = chart.grid(count)
    nearest = np.empty(len(points), dtype=np.int64)
    for start in range(0, len(points), Constants.CHUNK_SIZE):
        block = points[start : start + Constants.CHUNK_SIZE]
        squared = np.sum((block[:, None, :] - tri.vertices[None, :, :]) ** 2, axis=-1)
        nearest[start : start + len(block)] = np.argmin(squared, axis=1)
    return float(np.max(segment_lengths(points, tri.vertices[nearest] - points, g)))


def locate(tri: Triangulation, points: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """Index of the triangle containing each point; nearest centroid when outside the mesh."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    coordinates = tri.lattice_coordinates(points)
    cells = np.floor(coordinates).astype(np.int64)
    fractions = coordinates - cells
    result = np.empty(len(points), dtype=np.int64)
    centroid_coordinates = None
    for index, ((i, j), (fs, ft)) in enumerate(zip(cells, fractions)):
        orientation = PLUS if fs >= ft else MINUS
        found = tri.cell_triangle(int(i), int(j), orientation)
        if found is None:
            if centroid_coordinates is None:
                centroid_coordinates = tri.lattice_coordinates(tri.centroids)
            offsets = centroid_coordinates - coordinates[index]
            found = int(np.argmin(np.sum(offsets**2, axis=-1)))
        result[index] = found
    return result


class Ring(NamedTuple):
    """Lattice points adjacent to the mesh but outside it, and the triangles they close.

    neighbors[k] lists the mesh vertices adjacent to ring point k. Triangles index the combined
    vertex list (mesh vertices first, then ring points) and each uses at least one ring point.
    """

    lattice: npt.NDArray[np.int64]
    positions: FloatArray
    neighbors: list[list[int]]
    triangles: npt.NDArray[np.int64]
    orientations: npt.NDArray[np.int64]


def ring_vertices(tri: Triangulation) -> Ring:
    """The one-layer ring of lattice points around the mesh."""
    ring_index: dict[tuple[int, int], int] = {}
    neighbors: list[list[int]] = []
    for vertex in np.flatnonzero(tri.boundary):
        i, j = (int(v) for v in tri.lattice[vertex])
        for sign in (1, -1):
            for di, dj in AXIS_STEPS:
                key = (i + sign * di, j + sign * dj)
                if tri.vertex_at(*key) is not None:
                    continue
                if key not in ring_index:
                    ring_index[key] = len(neighbors)
                    neighbors.append([])
                neighbors[ring_index[key]].append(int(vertex))

    ordered = sorted(ring_index, key=lambda c: (c[1], c[0]))
    lattice = np.array(ordered, dtype=np.int64).reshape(-1, 2)
    order = [ring_index[(int(i), int(j))] for i, j in lattice]
    neighbors = [sorted(neighbors[k]) for k in order]
    combined = {(int(i), int(j)): index for index, (i, j) in enumerate(tri.lattice)}
    for offset, (i, j) in enumerate(lattice):
        combined[(int(i), int(j))] = tri.vertex_count + offset

    triangles = []
    orientations = []
    cells = {(int(i) + di, int(j) + dj) for i, j in lattice for di in (-1, 0) for dj in (-1, 0)}
    for i, j in sorted(cells, key=lambda c: (c[1], c[0])):
        for corners, orientation in (
            (((i, j), (i + 1, j), (i + 1, j + 1)), PLUS),
            (((i + 1, j + 1), (i, j + 1), (i, j)), MINUS),
        ):
            indices = [combined.get(corner) for corner in corners]
            if any(index is None for index in indices):
                continue
            if all(index < tri.vertex_count for index in indices):  # type: ignore[operator]
                continue
            triangles.append(indices)
            orientations.append(orientation)

    return Ring(
        lattice=lattice,
        positions=tri.lattice_point(lattice) if len(lattice) else np.zeros((0, 2)),
        neighbors=neighbors,
        triangles=np.array(triangles, dtype=np.int64).reshape(-1, 3),
        orientations=np.array(orientations, dtype=np.int64),
    )
