"""Property suites that check the library against closed forms and independent oracles.

Every suite is deterministic for a given seed and returns a SuiteResult whose details hold the
measured quantities, so failures can be diagnosed from the report alone.
"""

import dataclasses
import math
from typing import Any, Callable, ClassVar

import numpy as np

from libincompat.continuum import (
    ContinuumDensity,
    affine_extend,
    conformal_symmetry_check,
    density_constants,
    integral_energy,
)
from libincompat.energy import (
    BondLaw,
    Laws,
    VolumeLaw,
    bond_contributions,
    energy_gradient,
    total_energy,
    validate_laws,
    volume_contributions,
)
from libincompat.field_expr import parse_field
from libincompat.geometry import (
    Chart,
    DistanceOptions,
    LatticeFrame,
    MetricField,
    dist_squared_to_O,
    dist_squared_to_SO,
    isometry,
    metric_inverse_sqrt,
    riemannian_distance,
    riemannian_distances,
    segment_lengths,
    singular_values_g,
)
from libincompat.triangulation import (
    MeasureOptions,
    TriangleMeasures,
    Triangulation,
    build_lattice,
    compute_measures,
)
from libincompat.utilities import FloatArray, Log, rotation, spawn_rngs

SUITE_NAMES: tuple[str, ...] = ("appendix", "distance", "energy", "continuum", "conformal")


class Constants:
    """Sample sizes and tolerances of the suites."""

    TRIALS: ClassVar[int] = 100_000
    SLACK: ClassVar[float] = 1e-12
    CLOSED_FORM_TOLERANCE: ClassVar[float] = 1e-10
    RATIO_PAIRS: ClassVar[int] = 100
    RATIO_STABILITY: ClassVar[float] = 2.0
    MIN_DISTANCE_SLOPE: ClassVar[float] = 1.9
    GRADIENT_TOLERANCE: ClassVar[float] = 1e-6
    GRADIENT_STEP: ClassVar[float] = 1e-6
    FRAME_TOLERANCE: ClassVar[float] = 1e-10
    IDENTITY_TOLERANCE: ClassVar[float] = 1e-10
    SYMMETRY_TOLERANCE: ClassVar[float] = 1e-10
    NON_FLAT_PHI: ClassVar[str] = "exp((x^2 + y^2) / 2)"


@dataclasses.dataclass
class SuiteResult:
    """Outcome of one suite."""

    name: str
    passed: bool
    details: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "details": self.details}

    def __str__(self) -> str:
        return f"SuiteResult<{self.name}: {'passed' if self.passed else 'FAILED'}>"


def non_flat_metric(frame: LatticeFrame | None = None) -> MetricField:
    """The conformal metric exp(x^2 + y^2) I, whose Gauss curvature never vanishes."""
    return MetricField.conformal(
        frame or LatticeFrame.hexagonal(), parse_field(Constants.NON_FLAT_PHI)
    )


def quick_measures(tri: Triangulation, g: MetricField) -> TriangleMeasures:
    """Measures with straight-segment distances, for oracle checks that do not need geodesics."""
    return compute_measures(tri, g, MeasureOptions(distance=DistanceOptions(fast=True)))


def _random_metrics(rng: np.random.Generator, count: int) -> FloatArray:
    factors = rng.normal(size=(count, 2, 2))
    return factors @ np.swapaxes(factors, -1, -2) + 0.1 * np.eye(2)


def _independent_pairs(
    rng: np.random.Generator, count: int, min_angle: float, max_angle: float
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Random x, unit directions at angle theta from x; returns (x, direction of y, theta)."""
    angle = rng.uniform(0, 2 * math.pi, count)
    x = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    theta = rng.uniform(min_angle, max_angle, count)
    y = np.stack([np.cos(angle + theta), np.sin(angle + theta)], axis=-1)
    return x, y, theta


def _ratio_sum(a: FloatArray, x: FloatArray, y: FloatArray) -> FloatArray:
    """|Ax|^2/|x|^2 + |Ay|^2/|y|^2 + |A(x+y)|^2/|x+y|^2 for stacks."""
    total = np.zeros(len(a))
    for u in (x, y, x + y):
        image = np.einsum("nij,nj->ni", a, u)
        total += np.sum(image**2, axis=-1) / np.sum(u**2, axis=-1)
    return total


def _closed_form_distances(b: FloatArray) -> tuple[FloatArray, FloatArray]:
    """dist^2 of B to SO(2) and O(2) from |B|^2 + 2 - 2 max tr(Q^T B)."""
    norm2 = np.sum(b * b, axis=(-2, -1))
    rotation_trace = np.hypot(b[..., 0, 0] + b[..., 1, 1], b[..., 1, 0] - b[..., 0, 1])
    reflection_trace = np.hypot(b[..., 0, 0] - b[..., 1, 1], b[..., 1, 0] + b[..., 0, 1])
    to_so = norm2 + 2 - 2 * rotation_trace
    to_o = norm2 + 2 - 2 * np.maximum(rotation_trace, reflection_trace)
    return to_so, to_o


def three_norm_constant(r: FloatArray, theta: FloatArray) -> FloatArray:
    """The constant of the three-direction norm bound for |y| = r |x| at angle theta, r >= 1.

    Splits x + y into v = x + alpha y and w = (1 - alpha) y of equal length, applies the
    equal-length bound 2 / (1 - cos angle(v, w)) and absorbs the cross terms.
    """
    cos_theta = np.cos(theta)
    alpha = (r**2 - 1) / (2 * r * (r + cos_theta))
    # |x| = 1, |y| = r; v . w, |v| = |w| = (1 - alpha) r.
    dot = (1 - alpha) * (r * cos_theta + alpha * r**2)
    cos_vw = dot / ((1 - alpha) * r) ** 2
    equal_length = 2 / (1 - cos_vw)
    scale = np.maximum.reduce(
        [
            (1 + alpha) / ((1 - alpha) ** 2 * r**2),
            1 + (alpha**2 + alpha) / (1 - alpha) ** 2,
            np.ones_like(r),
        ]
    )
    return equal_length * scale


def fiber_suite(seed: int = 0, trials: int = Constants.TRIALS) -> SuiteResult:
    """The fiber inequalities: isometry from three norms, the norm bounds and the SO / O gap."""
    rngs = spawn_rngs(seed, 5)
    slack = Constants.SLACK
    details: dict[str, Any] = {"trials": trials}

    # Maps of O(2) preserving three norms preserve the inner product.
    rng = rngs[0]
    turns = rng.uniform(0, 2 * math.pi, trials)
    maps = np.stack(
        [
            np.stack([np.cos(turns), -np.sin(turns)], -1),
            np.stack([np.sin(turns), np.cos(turns)], -1),
        ],
        -2,
    )
    reflected = rng.random(trials) < 0.5
    maps[reflected] = maps[reflected] @ np.diag([1.0, -1.0])
    x = rng.normal(size=(trials, 2))
    y = rng.normal(size=(trials, 2))
    ax = np.einsum("nij,nj->ni", maps, x)
    ay = np.einsum("nij,nj->ni", maps, y)
    axy = np.einsum("nij,nj->ni", maps, x + y)
    polarized = (np.sum(axy**2, -1) - np.sum(ax**2, -1) - np.sum(ay**2, -1)) / 2
    scale = np.sum(x**2, -1) + np.sum(y**2, -1)
    residual = np.maximum.reduce(
        [
            np.abs(np.sum(ax**2, -1) - np.sum(x**2, -1)),
            np.abs(np.sum(ay**2, -1) - np.sum(y**2, -1)),
            np.abs(polarized - np.sum(x * y, -1)),
        ]
    ) / scale
    details["isometry_violations"] = int(np.sum(residual > slack))
    details["isometry_max_residual"] = float(residual.max())

    # Equal-length directions: |A|^2 <= 2 / (1 - cos theta) * (three ratios).
    rng = rngs[1]
    x, y, theta = _independent_pairs(rng, trials, 0.05, math.pi - 0.05)
    length = np.exp(rng.normal(size=(trials, 1)))
    x, y = x * length, y * length
    a = rng.normal(size=(trials, 2, 2)) * np.exp(rng.normal(size=(trials, 1, 1)))
    lhs = np.sum(a * a, axis=(-2, -1))
    rhs = 2 / (1 - np.cos(theta)) * _ratio_sum(a, x, y)
    details["equal_length_violations"] = int(np.sum(lhs > rhs * (1 + slack)))

    # Unequal lengths with the constructive constant.
    rng = rngs[2]
    x, y, theta = _independent_pairs(rng, trials, 0.05, math.pi - 0.05)
    r = np.exp(np.abs(rng.normal(size=trials)))
    y = y * r[:, None]
    a = rng.normal(size=(trials, 2, 2)) * np.exp(rng.normal(size=(trials, 1, 1)))
    lhs = np.sum(a * a, axis=(-2, -1))
    rhs = three_norm_constant(r, theta) * _ratio_sum(a, x, y)
    details["ratio_constant_violations"] = int(np.sum(lhs > rhs * (1 + slack)))

    # dist^2(A, O) against the elongation sum: the best constant per (x, y) stays finite and stable.
    rng = rngs[3]
    pairs = Constants.RATIO_PAIRS
    per_pair = max(trials // pairs, 2)
    half = per_pair // 2
    x, y, _ = _independent_pairs(rng, pairs, math.pi / 6, 5 * math.pi / 6)
    y = y * rng.uniform(0.5, 2.0, size=(pairs, 1))
    identity = np.eye(2)
    worst_spread = 1.0
    largest = 0.0
    for index in range(pairs):
        symmetric = rng.normal(size=(per_pair, 2, 2))
        symmetric = (symmetric + np.swapaxes(symmetric, -1, -2)) / 2
        size = np.exp(rng.uniform(math.log(1e-3), math.log(3.0), size=(per_pair, 1, 1)))
        turn = rng.uniform(0, 2 * math.pi, per_pair)
        left = np.stack(
            [
                np.stack([np.cos(turn), -np.sin(turn)], -1),
                np.stack([np.sin(turn), np.cos(turn)], -1),
            ],
            -2,
        )
        a = left @ (identity + size * symmetric)
        distance = np.asarray(dist_squared_to_O(a, identity))
        elongation = np.zeros(per_pair)
        for u in (x[index], y[index], x[index] + y[index]):
            elongation += (np.linalg.norm(a @ u, axis=-1) / np.linalg.norm(u) - 1) ** 2
        ratio = distance / elongation
        first, second = float(ratio[:half].max()), float(ratio[half:].max())
        largest = max(largest, first, second)
        worst_spread = max(worst_spread, max(first, second) / min(first, second))
    details["elongation_constant_max"] = largest
    details["elongation_constant_spread"] = worst_spread
    elongation_ok = math.isfinite(largest) and worst_spread <= Constants.RATIO_STABILITY

    # dist^2(A, SO) <= dist^2(A, O) + 4 |det B|^(1/2) on det < 0, and the closed forms agree.
    rng = rngs[4]
    metrics = _random_metrics(rng, trials)
    a = rng.normal(size=(trials, 2, 2)) * np.exp(rng.normal(size=(trials, 1, 1)))
    to_so = np.asarray(dist_squared_to_SO(a, metrics))
    to_o = np.asarray(dist_squared_to_O(a, metrics))
    b = a @ metric_inverse_sqrt(metrics)
    det = np.linalg.det(b)
    size = 1 + np.sum(b * b, axis=(-2, -1))
    bound = to_o + 4 * np.sqrt(np.abs(det)) * (det < 0)
    details["det_gap_violations"] = int(np.sum(to_so > bound + slack * size))
    details["det_gap_equality_violations"] = int(
        np.sum((det >= 0) & (np.abs(to_so - to_o) > slack * size))
    )
    oracle_so, oracle_o = _closed_form_distances(b)
    mismatch = np.maximum(np.abs(oracle_so - to_so), np.abs(oracle_o - to_o)) / size
    details["closed_form_max_mismatch"] = float(mismatch.max())
    sigma1, sigma2, _ = singular_values_g(a, metrics)
    details["singular_value_order_violations"] = int(
        np.sum(np.asarray(sigma1) < np.asarray(sigma2) - slack)
    )

    passed = (
        details["isometry_violations"] == 0
        and details["equal_length_violations"] == 0
        and details["ratio_constant_violations"] == 0
        and elongation_ok
        and details["det_gap_violations"] == 0
        and details["det_gap_equality_violations"] == 0
        and details["closed_form_max_mismatch"] <= Constants.CLOSED_FORM_TOLERANCE
        and details["singular_value_order_violations"] == 0
    )
    return SuiteResult("appendix", passed, details)


def distance_slope(
    g: MetricField,
    point: tuple[float, float] = (0.4, 0.3),
    lengths: FloatArray | None = None,
    seed: int = 0,
) -> tuple[float, FloatArray, FloatArray]:
    """Log-log slope of |d(p, p + v) - |v|_g(p)| against |v|_g(p).

    Returns:
        The fitted slope, the lengths and the errors
    """
    if lengths is None:
        lengths = np.geomspace(1e-3, 1e-1, 9)
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0, 2 * math.pi)
    direction = np.array([math.cos(angle), math.sin(angle)])
    p = np.asarray(point, dtype=float)
    unit = direction / float(g.norm(p, direction))
    ends = p + lengths[:, None] * unit
    distances = riemannian_distances(np.tile(p, (len(ends), 1)), ends, g).distances
    errors = np.abs(distances - lengths)
    slope = float(np.polyfit(np.log(lengths), np.log(errors), 1)[0])
    return slope, lengths, errors


def distance_suite(seed: int = 0, samples: int = 20) -> SuiteResult:
    """Quadratic order of the distance error, geodesic minimality and constant-metric agreement."""
    g = non_flat_metric()
    slope, _, errors = distance_slope(g, seed=seed)
    details: dict[str, Any] = {"slope": slope, "errors": errors.tolist()}

    rng = np.random.default_rng(seed)
    starts = rng.uniform(0.1, 0.9, size=(samples, 2))
    ends = rng.uniform(0.1, 0.9, size=(samples, 2))
    relaxed = riemannian_distances(starts, ends, g).distances
    straight = segment_lengths(starts, ends - starts, g, 16)
    details["minimality_excess"] = float(np.max(relaxed - straight))

    stretched = MetricField.from_chart(
        LatticeFrame.hexagonal(),
        parse_field("2"),
        parse_field("3"),
        parse_field("0.5"),
    )
    constant_gap = max(
        abs(
            riemannian_distance(p, q, stretched)
            - float(segment_lengths(p, np.subtract(q, p), stretched))
        )
        for p, q in zip(starts[:5], ends[:5])
    )
    details["constant_metric_gap"] = constant_gap

    passed = (
        slope >= Constants.MIN_DISTANCE_SLOPE
        and details["minimality_excess"] <= 1e-10
        and constant_gap <= 1e-8
    )
    return SuiteResult("distance", passed, details)


def gradient_error(
    tri: Triangulation,
    measures: TriangleMeasures,
    laws: Laws,
    f: FloatArray,
    step: float = Constants.GRADIENT_STEP,
) -> float:
    """Max-norm relative error of energy_gradient against central differences."""
    analytic = energy_gradient(tri, measures, laws, f)
    numeric = np.zeros_like(f)
    for index in np.ndindex(*f.shape):
        shifted = f.copy()
        shifted[index] += step
        upper = total_energy(tri, measures, laws, shifted).total
        shifted[index] -= 2 * step
        lower = total_energy(tri, measures, laws, shifted).total
        numeric[index] = (upper - lower) / (2 * step)
    return float(np.max(np.abs(analytic - numeric)) / max(float(np.max(np.abs(numeric))), 1e-300))


def _random_rigid(rng: np.random.Generator, f: FloatArray) -> FloatArray:
    return f @ rotation(float(rng.uniform(0, 2 * math.pi))).T + rng.normal(size=2)


def energy_suite(seed: int = 0, pairs: int = 10) -> SuiteResult:
    """Gradient oracle, frame indifference, reflection penalty, locality and the law checks."""
    rng = np.random.default_rng(seed)
    chart = Chart(0.0, 0.8, 0.0, 0.7)
    frame = LatticeFrame.hexagonal()
    laws = Laws.default()
    meshes = []
    for g in (MetricField.euclidean(frame), non_flat_metric(frame)):
        tri = build_lattice(chart, frame, g, 0.25)
        meshes.append((tri, g, quick_measures(tri, g)))

    gradient_errors = []
    frame_errors = []
    for trial in range(pairs):
        tri, _, measures = meshes[trial % len(meshes)]
        f = tri.vertices + rng.normal(scale=0.05 * tri.epsilon, size=tri.vertices.shape)
        gradient_errors.append(gradient_error(tri, measures, laws, f))
        base = total_energy(tri, measures, laws, f).total
        moved = total_energy(tri, measures, laws, _random_rigid(rng, f)).total
        frame_errors.append(abs(moved - base) / max(abs(base), 1e-300))

    tri, _, measures = meshes[0]
    identity = tri.vertices.copy()
    mirrored = identity * np.array([1.0, -1.0])
    bond_same = abs(
        float(np.sum(bond_contributions(tri, measures, laws.bond, mirrored)))
        - float(np.sum(bond_contributions(tri, measures, laws.bond, identity)))
    )
    volume_gain = float(np.sum(volume_contributions(tri, measures, laws.volume, mirrored))) - float(
        np.sum(volume_contributions(tri, measures, laws.volume, identity))
    )

    tri, _, measures = meshes[1]
    f = tri.vertices + rng.normal(scale=0.05 * tri.epsilon, size=tri.vertices.shape)
    vertex = int(rng.integers(tri.vertex_count))
    moved = f.copy()
    moved[vertex] += rng.normal(scale=0.1 * tri.epsilon, size=2)
    before = total_energy(tri, measures, laws, f, detail=True)
    after = total_energy(tri, measures, laws, moved, detail=True)
    assert before.per_edge is not None and after.per_edge is not None
    assert before.per_triangle is not None and after.per_triangle is not None
    edges_changed = set(np.flatnonzero(before.per_edge != after.per_edge).tolist())
    triangles_changed = set(np.flatnonzero(before.per_triangle != after.per_triangle).tolist())
    incident_edges = set(np.flatnonzero(np.any(tri.edges == vertex, axis=1)).tolist())
    incident_triangles = set(np.flatnonzero(np.any(tri.triangles == vertex, axis=1)).tolist())
    local = edges_changed <= incident_edges and triangles_changed <= incident_triangles

    hencky = BondLaw.custom(parse_field("sqrt((x - 1/x)^2) / 2"))
    law_reports = {
        "hookean": validate_laws(BondLaw.hookean()).passed,
        "huber": validate_laws(VolumeLaw()).passed,
        "hencky_rejected": not validate_laws(hencky).passed,
    }

    details: dict[str, Any] = {
        "gradient_max_error": max(gradient_errors),
        "frame_max_error": max(frame_errors),
        "reflection_bond_change": bond_same,
        "reflection_volume_gain": volume_gain,
        "local": local,
        "laws": law_reports,
    }
    passed = (
        details["gradient_max_error"] < Constants.GRADIENT_TOLERANCE
        and details["frame_max_error"] <= Constants.FRAME_TOLERANCE
        and bond_same <= 1e-12
        and volume_gain > 0
        and local
        and all(law_reports.values())
    )
    return SuiteResult("energy", passed, details)


def continuum_suite(seed: int = 0, samples: int = 10_000) -> SuiteResult:
    """Integral identity, zero set of W and its growth."""
    rng = np.random.default_rng(seed)
    frame = LatticeFrame.hexagonal()
    g = non_flat_metric(frame)
    laws = Laws.default()
    density = ContinuumDensity(g, laws)

    identity_errors = []
    for epsilon in (0.3, 0.2, 0.15):
        tri = build_lattice(Chart.unit_square(), frame, g, epsilon)
        measures = quick_measures(tri, g)
        for _ in range(3):
            f = tri.vertices + rng.normal(scale=0.1 * epsilon, size=tri.vertices.shape)
            discrete = total_energy(tri, measures, laws, f).total
            integral = integral_energy(affine_extend(tri, f), density, measures)
            identity_errors.append(abs(discrete - integral) / max(abs(discrete), 1e-300))

    points = rng.uniform(0.0, 1.0, size=(samples, 2))
    metrics = g.tensor(points)
    # Rotations (a quarter of them jittered far below the threshold), reflections, random maps.
    quarter = samples // 4
    fibers = rng.normal(size=(samples, 2, 2))
    turns = rng.uniform(0, 2 * math.pi, samples)
    for index in range(3 * quarter):
        fibers[index] = isometry(metrics[index], float(turns[index]), index >= 2 * quarter)
    fibers[:quarter] += rng.normal(scale=1e-9, size=(quarter, 2, 2))
    values = density.limit(fibers, points)
    distances = np.asarray(dist_squared_to_SO(fibers, metrics))
    zero_mismatch = int(np.sum((values < 1e-10) != (distances < 1e-8)))
    alpha, growth = density_constants(density, fibers, points)

    details: dict[str, Any] = {
        "identity_max_error": max(identity_errors),
        "zero_set_mismatches": zero_mismatch,
        "alpha_estimate": alpha,
        "growth_estimate": growth,
    }
    passed = (
        details["identity_max_error"] < Constants.IDENTITY_TOLERANCE
        and zero_mismatch == 0
        and math.isfinite(growth)
        and alpha > 0
    )
    return SuiteResult("continuum", passed, details)


def conformal_suite(seed: int = 0, samples: int = 1000) -> SuiteResult:
    """Material-connection and pi/3 invariance of W, with a non-conformal negative control."""
    frame = LatticeFrame.hexagonal()
    laws = Laws.default()
    chart = Chart.unit_square()
    checked = {}
    for name, g in (
        ("homogeneous", MetricField.euclidean(frame)),
        ("exponential", non_flat_metric(frame)),
    ):
        report = conformal_symmetry_check(ContinuumDensity(g, laws), chart, samples, seed)
        checked[name] = report.to_json()
        checked[name]["passed"] = report.passed(Constants.SYMMETRY_TOLERANCE)

    general = MetricField(frame, parse_field("1 + x^2"), parse_field("1"), parse_field("-0.25"))
    control = conformal_symmetry_check(ContinuumDensity(general, laws), chart, samples, seed)
    checked["non_conformal_skipped"] = control.skipped

    passed = all(
        entry["passed"] for entry in checked.values() if isinstance(entry, dict)
    ) and bool(control.skipped)
    return SuiteResult("conformal", passed, checked)


_SUITES: dict[str, Callable[[int], SuiteResult]] = {
    "appendix": fiber_suite,
    "distance": distance_suite,
    "energy": energy_suite,
    "continuum": continuum_suite,
    "conformal": conformal_suite,
}


def run_suites(selector: str = "all", seed: int = 0) -> list[SuiteResult]:
    """Run every suite, or only the named one.

    Raises:
        ValueError: If the selector names no suite
    """
    if selector == "all":
        names = list(SUITE_NAMES)
    elif selector in _SUITES:
        names = [selector]
    else:
        raise ValueError(f"Unknown suite {selector!r}, expected 'all' or one of {SUITE_NAMES}")

    results = []
    for name in names:
        result = _SUITES[name](seed)
        level = Log.info if result.passed else Log.error
        level(f"Suite {name}: {'passed' if result.passed else 'FAILED'}")
        results.append(result)
    return results
