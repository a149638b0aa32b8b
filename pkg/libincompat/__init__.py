"""libincompat simulates discrete incompatible elasticity on hexagonal lattices.

A body with a reference metric is tiled by an epsilon-scale hexagonal triangulation whose edges
carry springs and whose triangles carry a signed-volume penalty. The library minimizes that
energy, follows it as epsilon shrinks and compares it with the continuum limit density.
"""

import concurrent.futures
import dataclasses
import math
from typing import Any, ClassVar

import numpy as np

from libincompat.continuum import (
    ContinuumDensity,
    QwEstimate,
    qw_upper_estimate,
    sample_fibers,
)
from libincompat.exceptions import IncompatException
from libincompat.geometry import FiberMap, gauss_curvature, isometry
from libincompat.minimize import (
    MinimizeResult,
    SweepReport,
    epsilon_sweep,
    initial_configuration,
    minimize_config,
)
from libincompat.model import ProblemConfig, default_config
from libincompat.triangulation import (
    TriangleMeasures,
    Triangulation,
    build_lattice,
    chart_volume,
    compute_measures,
    coverage_defect,
    density_radius,
)
from libincompat.utilities import Log
from libincompat.validation import SuiteResult, run_suites


@dataclasses.dataclass
class MeshSummary:
    """Counts and coverage of a triangulation."""

    epsilon: float
    vertices: int
    edges: int
    triangles: int
    area: float
    chart_volume: float
    defect: float
    density_radius: float

    @property
    def defect_ratio(self) -> float:
        return self.defect / self.chart_volume

    def to_json(self) -> dict[str, Any]:
        return {**dataclasses.asdict(self), "defect_ratio": self.defect_ratio}


@dataclasses.dataclass
class MinimizeReport:
    """A minimization at one epsilon."""

    epsilon: float
    tri: Triangulation
    result: MinimizeResult

    @property
    def warnings(self) -> bool:
        diagnostics = self.result.diagnostics
        return not diagnostics.converged or diagnostics.line_search_failed

    def to_json(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "n_vertices": self.tri.vertex_count,
            "min_energy": self.result.energy.total,
            "energy": self.result.energy.to_json(),
            "diagnostics": self.result.diagnostics.to_json(),
            "configuration": self.result.configuration.tolist(),
        }


@dataclasses.dataclass
class QwRow:
    """One fiber of the QW table."""

    matrix: list[float]
    estimate: QwEstimate
    violates: bool

    CSV_COLUMNS: ClassVar[tuple[str, ...]] = (
        "a00",
        "a01",
        "a10",
        "a11",
        "w",
        "qw_est",
        "dist2",
        "violates",
    )

    def csv_fields(self) -> list[str]:
        numbers = [*self.matrix, self.estimate.w_value, self.estimate.value, self.estimate.dist2]
        return [repr(float(value)) for value in numbers] + [str(int(self.violates))]


@dataclasses.dataclass
class QwTable:
    """QW estimates of sampled fibers at one base point."""

    point: tuple[float, float]
    rows: list[QwRow]

    @property
    def violations(self) -> int:
        return sum(row.violates for row in self.rows)

    def to_csv(self) -> str:
        lines = [",".join(QwRow.CSV_COLUMNS)]
        lines.extend(",".join(row.csv_fields()) for row in self.rows)
        return "\n".join(lines) + "\n"


@dataclasses.dataclass
class CurvatureReport:
    """Gauss curvature sampled on a grid over the chart."""

    minimum: float
    maximum: float
    flat: bool
    count: int

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


class ElasticityLab:
    """Runs the experiments of one problem configuration."""

    class Constants:
        """Constants used by the lab."""

        CURVATURE_GRID: ClassVar[int] = 32
        CURVATURE_MARGIN: ClassVar[float] = 1e-3
        FLAT_TOLERANCE: ClassVar[float] = 1e-10
        SANDWICH_TOLERANCE: ClassVar[float] = 1e-9

    config: ProblemConfig

    def __init__(self, config: ProblemConfig | None = None) -> None:
        """Create a lab for a validated configuration.

        Args:
            config: The problem; the Euclidean unit square when omitted

        Raises:
            ConfigException: If the configuration is invalid
        """
        self.config = config if config is not None else default_config()
        self.config.validate()
        self.problem = self.config.problem()
        self.density = ContinuumDensity(self.problem.g, self.problem.laws)

    def __str__(self) -> str:
        return f"ElasticityLab<{self.config}>"

    def triangulate(self, epsilon: float | None = None) -> tuple[Triangulation, TriangleMeasures]:
        """Build the triangulation and its measures.

        Raises:
            MeshException: If the domain is too small for epsilon
        """
        epsilon = epsilon if epsilon is not None else self.config.single_epsilon()
        problem = self.problem
        tri = build_lattice(problem.chart, problem.frame, problem.g, epsilon, problem.offset)
        return tri, compute_measures(tri, problem.g, problem.measures)

    def mesh(self, epsilon: float | None = None) -> tuple[Triangulation, MeshSummary]:
        tri, measures = self.triangulate(epsilon)
        problem = self.problem
        summary = MeshSummary(
            epsilon=tri.epsilon,
            vertices=tri.vertex_count,
            edges=tri.edge_count,
            triangles=tri.triangle_count,
            area=measures.total_area,
            chart_volume=chart_volume(problem.g, problem.chart),
            defect=coverage_defect(problem.chart, tri, problem.g, measures),
            density_radius=density_radius(problem.chart, tri, problem.g),
        )
        Log.info(f"Mesh at eps={tri.epsilon}: {summary.defect_ratio:.3%} of the volume uncovered")
        return tri, summary

    def minimize(self, epsilon: float | None = None) -> MinimizeReport:
        tri, measures = self.triangulate(epsilon)
        options = self.config.solve_options()
        initial = self.config.initial
        init = initial_configuration(
            tri,
            self.config.initial_kind(),
            factor=initial.factor if initial and initial.factor is not None else 1.0,
            amplitude=initial.amplitude if initial and initial.amplitude is not None else 0.0,
            rng=np.random.default_rng(options.seed),
            custom=self.config.custom_initial(),
        )
        result = minimize_config(tri, measures, self.problem.laws, init, options)
        return MinimizeReport(tri.epsilon, tri, result)

    def sweep(self, eps_list: list[float] | None = None) -> SweepReport:
        """Run an epsilon sweep over the configured scales.

        Raises:
            ValueError: If fewer than 3 scales are given or they do not decrease
        """
        initial = self.config.initial
        return epsilon_sweep(
            self.problem,
            eps_list if eps_list is not None else self.config.sweep_scales(),
            self.config.solve_options(),
            initial=self.config.initial_kind(),
            amplitude=initial.amplitude if initial and initial.amplitude is not None else 0.0,
        )

    def qw_table(self) -> QwTable:
        """QW estimates of one rotation and randomly sampled fibers at the configured point.

        The first row is a g-isometry; rows are estimated in parallel and kept in sample order.
        """
        samples, level, starts, min_dist2 = self.config.qw_settings()
        point = self.config.qw_point()
        seed = self.config.seed or 0
        metric = self.problem.g.tensor(np.array(point))
        rng = np.random.default_rng(seed)
        fibers = [isometry(metric, float(rng.uniform(0, 2 * math.pi)))]
        fibers.extend(sample_fibers(metric, samples - 1, rng, min_dist2))

        def estimate(item: tuple[int, np.ndarray]) -> QwEstimate:
            index, matrix = item
            return qw_upper_estimate(
                FiberMap(point, matrix), self.density, level, starts, seed=seed + index
            )

        threads = self.config.threads or 1
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
            estimates = list(executor.map(estimate, enumerate(fibers)))

        tolerance = ElasticityLab.Constants.SANDWICH_TOLERANCE
        rows = [
            QwRow(
                [float(value) for value in matrix.ravel()],
                result,
                not -tolerance <= result.value <= result.w_value + tolerance,
            )
            for matrix, result in zip(fibers, estimates)
        ]
        table = QwTable(point, rows)
        if table.violations:
            Log.warning(f"{table.violations} QW rows violate 0 <= QW_est <= W")
        return table

    def curvature(self, count: int = Constants.CURVATURE_GRID) -> CurvatureReport:
        """Gauss curvature on a count x count grid over the chart."""
        points = self.problem.chart.grid(count, ElasticityLab.Constants.CURVATURE_MARGIN)
        values = np.asarray(gauss_curvature(self.problem.g, points))
        minimum, maximum = float(values.min()), float(values.max())
        flat = max(abs(minimum), abs(maximum)) <= ElasticityLab.Constants.FLAT_TOLERANCE
        return CurvatureReport(minimum, maximum, flat, count)

    def validate(self, selector: str = "all") -> list[SuiteResult]:
        return run_suites(selector, self.config.seed or 0)


__all__ = [
    "CurvatureReport",
    "ElasticityLab",
    "IncompatException",
    "MeshSummary",
    "MinimizeReport",
    "QwRow",
    "QwTable",
]
