"""Problem configuration documents."""

import copy
import json
import os
from typing import Any, ClassVar

import deserialize
import numpy as np

from libincompat.energy import BondKind, BondLaw, Laws, VolumeKind, VolumeLaw
from libincompat.exceptions import (
    ConfigException,
    FieldDomainError,
    FieldSyntaxError,
    MetricException,
)
from libincompat.field_expr import ScalarFieldExpr, parse_field
from libincompat.geometry import Chart, DistanceOptions, LatticeFrame, MetricField
from libincompat.minimize import INITIAL_KINDS, Problem, SolveOptions
from libincompat.model.parsers import float_list, float_vector, optional_float
from libincompat.triangulation import MeasureOptions
from libincompat.utilities import Log

METRIC_KINDS = ("euclidean", "conformal", "general")


def _expression(source: str | None, field_path: str) -> ScalarFieldExpr:
    if source is None:
        raise ConfigException("Expression is missing", field_path)
    try:
        return parse_field(source)
    except FieldSyntaxError as ex:
        raise ConfigException(f"Could not parse {source!r}: {ex}", field_path) from ex


def _positive(value: float | int | None, field_path: str) -> None:
    if value is not None and not value > 0:
        raise ConfigException(f"Must be positive, got {value}", field_path)


@deserialize.parser("x0", optional_float)
@deserialize.parser("x1", optional_float)
@deserialize.parser("y0", optional_float)
@deserialize.parser("y1", optional_float)
class ChartSpec:
    """The chart rectangle [x0, x1] x [y0, y1]."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __str__(self) -> str:
        return f"ChartSpec<[{self.x0}, {self.x1}] x [{self.y0}, {self.y1}]>"

    def __repr__(self) -> str:
        return str(self)


@deserialize.parser("a", float_vector)
@deserialize.parser("b", float_vector)
class FrameSpec:
    """The lattice axes a and b in chart coordinates."""

    a: list[float]
    b: list[float]

    def __str__(self) -> str:
        return f"FrameSpec<a={self.a}, b={self.b}>"

    def __repr__(self) -> str:
        return str(self)


class MetricSpec:
    """One of euclidean, conformal (phi) or general (g_aa, g_bb, g_ab in the lattice frame)."""

    kind: str
    phi: str | None
    g_aa: str | None
    g_bb: str | None
    g_ab: str | None

    def __str__(self) -> str:
        if self.kind == "conformal":
            return f"MetricSpec<conformal, phi={self.phi}>"
        if self.kind == "general":
            return f"MetricSpec<general, {self.g_aa}, {self.g_bb}, {self.g_ab}>"
        return f"MetricSpec<{self.kind}>"

    def __repr__(self) -> str:
        return str(self)


@deserialize.parser("alpha", optional_float)
@deserialize.parser("growth", optional_float)
@deserialize.parser("lipschitz", optional_float)
class BondLawSpec:
    """hookean, or custom with an expression in x."""

    kind: str
    expression: str | None
    alpha: float | None
    growth: float | None
    lipschitz: float | None


@deserialize.parser("beta", optional_float)
@deserialize.parser("delta", optional_float)
@deserialize.parser("alpha", optional_float)
@deserialize.parser("growth", optional_float)
@deserialize.parser("lipschitz", optional_float)
class VolumeLawSpec:
    """huber, abs or none."""

    kind: str
    beta: float | None
    delta: float | None
    alpha: float | None
    growth: float | None
    lipschitz: float | None


@deserialize.parser("gradient_tolerance", optional_float)
@deserialize.parser("sufficient_decrease", optional_float)
@deserialize.parser("backtrack", optional_float)
@deserialize.parser("noise", optional_float)
class SolverSpec:
    """Overrides of the SolveOptions defaults."""

    max_iterations: int | None
    gradient_tolerance: float | None
    sufficient_decrease: float | None
    backtrack: float | None
    history: int | None
    starts: int | None
    noise: float | None


class MeasureSpec:
    """Overrides of the MeasureOptions defaults."""

    quadrature_degree: int | None
    subdivisions: int | None
    n_sample: int | None
    distance_nodes: int | None
    fast_distance: bool | None


@deserialize.parser("factor", optional_float)
@deserialize.parser("amplitude", optional_float)
class InitialSpec:
    """The initial configuration of the first (coarsest) solve."""

    kind: str
    factor: float | None
    amplitude: float | None
    fx: str | None
    fy: str | None


@deserialize.parser("point", float_vector)
@deserialize.parser("min_dist2", optional_float)
class QwSpec:
    """Fiber samples for the QW table."""

    samples: int | None
    mesh_level: int | None
    starts: int | None
    point: list[float] | None
    min_dist2: float | None


class OutputSpec:
    """Where reports are written."""

    directory: str | None


@deserialize.parser("epsilon", optional_float)
@deserialize.parser("eps_list", float_list)
@deserialize.parser("offset", float_vector)
class ProblemConfig:
    """A complete problem: domain, lattice, metric, laws, scales and solver settings."""

    class Constants:
        """Defaults of unset configuration entries."""

        SCHEMA_VERSION: ClassVar[int] = 1
        SPD_GRID: ClassVar[int] = 64
        EPSILON: ClassVar[float] = 0.1
        EPS_LIST: ClassVar[tuple[float, ...]] = (0.2, 0.1, 0.05)
        QW_SAMPLES: ClassVar[int] = 10
        QW_LEVEL: ClassVar[int] = 2
        QW_STARTS: ClassVar[int] = 8
        QW_MIN_DIST2: ClassVar[float] = 0.0
        OUTPUT_DIRECTORY: ClassVar[str] = "out"

    schema_version: int
    chart: ChartSpec | None
    frame: FrameSpec | None
    metric: MetricSpec | None
    bond_law: BondLawSpec | None
    volume_law: VolumeLawSpec | None
    epsilon: float | None
    eps_list: list[float] | None
    offset: list[float] | None
    solver: SolverSpec | None
    measures: MeasureSpec | None
    initial: InitialSpec | None
    qw: QwSpec | None
    seed: int | None
    threads: int | None
    output: OutputSpec | None

    def __str__(self) -> str:
        return f"ProblemConfig<{self.chart}, {self.metric}>"

    def __repr__(self) -> str:
        return str(self)

    def override(
        self,
        *,
        seed: int | None = None,
        eps_list: list[float] | None = None,
        threads: int | None = None,
        output: str | None = None,
    ) -> "ProblemConfig":
        """A copy with command-line overrides applied."""
        result = copy.deepcopy(self)
        if seed is not None:
            result.seed = seed
        if eps_list is not None:
            result.eps_list = list(eps_list)
            result.epsilon = eps_list[0]
        if threads is not None:
            result.threads = threads
        if output is not None:
            result.output = OutputSpec()
            result.output.directory = output
        return result

    def validate(self) -> None:
        """Check everything that cannot be expressed in types.

        Raises:
            ConfigException: Naming the field path of the first problem found
        """
        if self.schema_version != ProblemConfig.Constants.SCHEMA_VERSION:
            raise ConfigException(
                f"Unsupported schema version {self.schema_version}, expected "
                f"{ProblemConfig.Constants.SCHEMA_VERSION}",
                "schema_version",
            )

        chart = self.build_chart()
        self.build_frame()
        _positive(self.epsilon, "epsilon")
        if self.eps_list is not None:
            if not self.eps_list:
                raise ConfigException("Must not be empty", "eps_list")
            for index, value in enumerate(self.eps_list):
                _positive(value, f"eps_list[{index}]")
            if any(fine >= coarse for coarse, fine in zip(self.eps_list, self.eps_list[1:])):
                raise ConfigException("Scales must be strictly decreasing", "eps_list")
        _positive(self.threads, "threads")

        metric = self.build_metric()
        try:
            metric.check_spd(chart, ProblemConfig.Constants.SPD_GRID)
        except MetricException as ex:
            raise ConfigException(str(ex), "metric") from ex
        except FieldDomainError as ex:
            raise ConfigException(f"Metric undefined on the chart: {ex}", "metric") from ex

        self.build_laws()
        self.solve_options()
        self.measure_options()
        self.initial_kind()
        self.custom_initial()
        if self.qw is not None:
            _positive(self.qw.samples, "qw.samples")
            _positive(self.qw.mesh_level, "qw.mesh_level")
            if self.qw.starts is not None and self.qw.starts < 0:
                raise ConfigException("Must be non-negative", "qw.starts")
            if self.qw.point is not None and not chart.contains(np.array(self.qw.point)):
                raise ConfigException(f"{self.qw.point} is outside {chart}", "qw.point")

        Log.debug(f"Validated {self}")

    def build_chart(self) -> Chart:
        if self.chart is None:
            return Chart.unit_square()
        try:
            return Chart(self.chart.x0, self.chart.x1, self.chart.y0, self.chart.y1)
        except ValueError as ex:
            raise ConfigException(str(ex), "chart") from ex

    def build_frame(self) -> LatticeFrame:
        if self.frame is None:
            return LatticeFrame.hexagonal()
        try:
            return LatticeFrame(tuple(self.frame.a), tuple(self.frame.b))  # type: ignore[arg-type]
        except ValueError as ex:
            raise ConfigException(str(ex), "frame") from ex

    def build_metric(self) -> MetricField:
        frame = self.build_frame()
        spec = self.metric
        if spec is None or spec.kind == "euclidean":
            return MetricField.euclidean(frame)
        if spec.kind == "conformal":
            return MetricField.conformal(frame, _expression(spec.phi, "metric.phi"))
        if spec.kind == "general":
            return MetricField(
                frame,
                _expression(spec.g_aa, "metric.g_aa"),
                _expression(spec.g_bb, "metric.g_bb"),
                _expression(spec.g_ab, "metric.g_ab"),
            )
        raise ConfigException(
            f"Unknown metric kind {spec.kind!r}, expected one of {METRIC_KINDS}", "metric.kind"
        )

    def build_laws(self) -> Laws:
        return Laws(self._bond_law(), self._volume_law())

    def _bond_law(self) -> BondLaw:
        spec = self.bond_law
        if spec is None:
            return BondLaw.hookean()
        try:
            kind = BondKind(spec.kind)
        except ValueError as ex:
            raise ConfigException(f"Unknown bond law {spec.kind!r}", "bond_law.kind") from ex
        constants = {
            name: value
            for name, value in (
                ("alpha", spec.alpha),
                ("growth", spec.growth),
                ("lipschitz", spec.lipschitz),
            )
            if value is not None
        }
        if kind == BondKind.HOOKEAN:
            return BondLaw(BondKind.HOOKEAN, None, **constants)
        return BondLaw.custom(_expression(spec.expression, "bond_law.expression"), **constants)

    def _volume_law(self) -> VolumeLaw:
        spec = self.volume_law
        if spec is None:
            return VolumeLaw()
        try:
            kind = VolumeKind(spec.kind)
        except ValueError as ex:
            raise ConfigException(f"Unknown volume law {spec.kind!r}", "volume_law.kind") from ex
        settings: dict[str, Any] = {
            name: value
            for name, value in (
                ("beta", spec.beta),
                ("delta", spec.delta),
                ("alpha", spec.alpha),
                ("growth", spec.growth),
                ("lipschitz", spec.lipschitz),
            )
            if value is not None
        }
        try:
            return VolumeLaw(kind, **settings)
        except ValueError as ex:
            raise ConfigException(str(ex), "volume_law") from ex

    def single_epsilon(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        if self.eps_list:
            return self.eps_list[0]
        return ProblemConfig.Constants.EPSILON

    def sweep_scales(self) -> list[float]:
        if self.eps_list is not None:
            return list(self.eps_list)
        return list(ProblemConfig.Constants.EPS_LIST)

    def solve_options(self) -> SolveOptions:
        spec = self.solver
        settings: dict[str, Any] = {"seed": self.seed or 0, "threads": self.threads or 1}
        if spec is not None:
            for name in (
                "max_iterations",
                "gradient_tolerance",
                "sufficient_decrease",
                "backtrack",
                "history",
                "starts",
                "noise",
            ):
                value = getattr(spec, name)
                if value is not None:
                    settings[name] = value
        try:
            options = SolveOptions(**settings)
            options.lbfgs(1.0)
        except ValueError as ex:
            raise ConfigException(str(ex), "solver") from ex
        return options

    def measure_options(self) -> MeasureOptions:
        spec = self.measures
        threads = self.threads or 1
        if spec is None:
            return MeasureOptions(threads=threads)
        _positive(spec.distance_nodes, "measures.distance_nodes")
        try:
            distance = DistanceOptions(
                nodes=DistanceOptions.nodes if spec.distance_nodes is None else spec.distance_nodes,
                fast=bool(spec.fast_distance),
            )
        except ValueError as ex:
            raise ConfigException(str(ex), "measures.distance_nodes") from ex
        if spec.quadrature_degree is not None and spec.quadrature_degree not in (1, 2, 6):
            raise ConfigException(
                f"Supported degrees are 1, 2 and 6, got {spec.quadrature_degree}",
                "measures.quadrature_degree",
            )
        _positive(spec.subdivisions, "measures.subdivisions")
        _positive(spec.n_sample, "measures.n_sample")
        return MeasureOptions(
            quadrature_degree=spec.quadrature_degree or MeasureOptions.quadrature_degree,
            subdivisions=spec.subdivisions or 1,
            n_sample=spec.n_sample or MeasureOptions.n_sample,
            distance=distance,
            threads=threads,
        )

    def initial_kind(self) -> str:
        kind = self.initial.kind if self.initial is not None else "chart-identity"
        if kind not in INITIAL_KINDS:
            raise ConfigException(
                f"Unknown initial configuration {kind!r}, expected one of {INITIAL_KINDS}",
                "initial.kind",
            )
        return kind

    def custom_initial(self) -> tuple[ScalarFieldExpr, ScalarFieldExpr] | None:
        if self.initial is None or self.initial.kind != "custom":
            return None
        return (
            _expression(self.initial.fx, "initial.fx"),
            _expression(self.initial.fy, "initial.fy"),
        )

    def problem(self) -> Problem:
        offset = (0.5, 0.5) if self.offset is None else (self.offset[0], self.offset[1])
        return Problem(
            chart=self.build_chart(),
            frame=self.build_frame(),
            g=self.build_metric(),
            laws=self.build_laws(),
            measures=self.measure_options(),
            offset=offset,
        )

    def output_directory(self) -> str:
        if self.output is None or self.output.directory is None:
            return ProblemConfig.Constants.OUTPUT_DIRECTORY
        return self.output.directory

    def qw_settings(self) -> tuple[int, int, int, float]:
        """(samples, mesh level, starts, minimum squared distance of sampled fibers)."""
        spec = self.qw
        constants = ProblemConfig.Constants
        if spec is None:
            return (constants.QW_SAMPLES, constants.QW_LEVEL, constants.QW_STARTS, 0.0)
        return (
            spec.samples or constants.QW_SAMPLES,
            spec.mesh_level or constants.QW_LEVEL,
            constants.QW_STARTS if spec.starts is None else spec.starts,
            constants.QW_MIN_DIST2 if spec.min_dist2 is None else spec.min_dist2,
        )

    def qw_point(self) -> tuple[float, float]:
        if self.qw is not None and self.qw.point is not None:
            return (self.qw.point[0], self.qw.point[1])
        center = self.build_chart().center
        return (float(center[0]), float(center[1]))


def parse_config(data: Any) -> ProblemConfig:
    """Decode and validate a configuration from parsed JSON.

    Raises:
        ConfigException: If a field is unknown, mistyped or semantically invalid
    """
    if not isinstance(data, dict):
        raise ConfigException("The configuration must be a JSON object")
    if "schema_version" not in data:
        raise ConfigException("Missing schema version", "schema_version")
    try:
        config = deserialize.deserialize(ProblemConfig, data, throw_on_unhandled=True)
    except deserialize.DeserializeException as ex:
        raise ConfigException(f"Invalid configuration: {ex}") from ex
    except ValueError as ex:
        raise ConfigException(f"Invalid value: {ex}") from ex

    config.validate()
    return config


def load_config(path: str | os.PathLike[str]) -> ProblemConfig:
    """Read, decode and validate a JSON configuration file.

    Raises:
        ConfigException: If the file cannot be read or the configuration is invalid
    """
    try:
        with open(path, encoding="utf-8") as config_file:
            data = json.load(config_file)
    except OSError as ex:
        raise ConfigException(f"Could not read {path}: {ex}") from ex
    except json.JSONDecodeError as ex:
        raise ConfigException(f"Could not decode {path}: {ex}") from ex

    return parse_config(data)


def default_config() -> ProblemConfig:
    """Euclidean unit square with the hexagonal frame and default laws."""
    return parse_config({"schema_version": 1})
