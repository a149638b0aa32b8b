"""Approximate minimizers of the discrete energy and epsilon sweeps."""

import concurrent.futures
import csv
import dataclasses
import io
import math
import time
from typing import Any, ClassVar, Literal

import numpy as np
import numpy.typing as npt

from libincompat.continuum import affine_extend, sample_map
from libincompat.energy import EnergyBreakdown, Laws, energy_gradient, total_energy
from libincompat.exceptions import EnergyException, SolverException
from libincompat.field_expr import ScalarFieldExpr
from libincompat.geometry import Chart, LatticeFrame, MetricField
from libincompat.optimizer import LbfgsOptions, LbfgsResult, lbfgs_minimize
from libincompat.triangulation import (
    MeasureOptions,
    TriangleMeasures,
    Triangulation,
    build_lattice,
    compute_measures,
    coverage_defect,
)
from libincompat.utilities import FloatArray, Log, spawn_rngs

InitialKind = Literal["chart-identity", "scaled", "random", "custom"]
INITIAL_KINDS: tuple[str, ...] = ("chart-identity", "scaled", "random", "custom")


@dataclasses.dataclass(frozen=True)
class SolveOptions:
    """Settings of minimize_config.

    gradient_tolerance None means 1e-8 times the mesh area. Extra starts perturb the initial
    configuration with uniform noise of amplitude noise * epsilon.
    """

    class Constants:
        """Defaults recorded in every report."""

        MAX_ITERATIONS: ClassVar[int] = 5000
        GRADIENT_SCALE: ClassVar[float] = 1e-8
        SUFFICIENT_DECREASE: ClassVar[float] = 1e-4
        BACKTRACK: ClassVar[float] = 0.5
        HISTORY: ClassVar[int] = 10
        STARTS: ClassVar[int] = 4
        NOISE: ClassVar[float] = 0.1

    max_iterations: int = Constants.MAX_ITERATIONS
    gradient_tolerance: float | None = None
    sufficient_decrease: float = Constants.SUFFICIENT_DECREASE
    backtrack: float = Constants.BACKTRACK
    history: int = Constants.HISTORY
    starts: int = Constants.STARTS
    noise: float = Constants.NOISE
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.gradient_tolerance is not None and not self.gradient_tolerance > 0:
            raise ValueError(f"gradient_tolerance must be positive, got {self.gradient_tolerance}")
        if self.starts < 1:
            raise ValueError(f"At least one start is needed, got {self.starts}")

    def lbfgs(self, area: float) -> LbfgsOptions:
        """The optimizer settings for a mesh of the given g-area."""
        tolerance = self.gradient_tolerance
        if tolerance is None:
            tolerance = SolveOptions.Constants.GRADIENT_SCALE * area
        return LbfgsOptions(
            max_iterations=self.max_iterations,
            gradient_tolerance=tolerance,
            sufficient_decrease=self.sufficient_decrease,
            backtrack=self.backtrack,
            history=self.history,
        )

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class Diagnostics:
    """How a minimization ended."""

    gradient_norm: float
    iterations: int
    converged: bool
    line_search_failed: bool
    start_energies: list[float]
    best_start: int

    def to_json(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class MinimizeResult:
    """The best configuration found, its energy and diagnostics."""

    configuration: FloatArray
    energy: EnergyBreakdown
    diagnostics: Diagnostics


def initial_configuration(
    tri: Triangulation,
    kind: str = "chart-identity",
    factor: float = 1.0,
    amplitude: float = 0.0,
    rng: np.random.Generator | None = None,
    custom: tuple[ScalarFieldExpr, ScalarFieldExpr] | None = None,
) -> FloatArray:
    """A starting configuration.

    Args:
        tri: The triangulation
        kind: chart-identity, scaled (vertices times factor), random (identity plus uniform noise
            of the given amplitude) or custom (the map given by two expressions)
        factor: Scale for the scaled kind
        amplitude: Noise amplitude for the random kind
        rng: Random source for the random kind
        custom: (fx, fy) for the custom kind

    Raises:
        ValueError: On an unknown kind or a custom kind without expressions
    """
    identity = tri.vertices.copy()
    if kind == "chart-identity":
        return identity
    if kind == "scaled":
        return factor * identity
    if kind == "random":
        if amplitude == 0:
            return identity
        rng = rng or np.random.default_rng(0)
        return identity + rng.uniform(-amplitude, amplitude, size=identity.shape)
    if kind == "custom":
        if custom is None:
            raise ValueError("A custom initial configuration needs two expressions")
        return sample_map(tri, *custom)
    raise ValueError(
        f"Unknown initial configuration kind {kind!r}, expected one of {INITIAL_KINDS}"
    )


def _solve(
    tri: Triangulation,
    measures: TriangleMeasures,
    laws: Laws,
    start: FloatArray,
    options: LbfgsOptions,
) -> LbfgsResult:
    shape = start.shape

    def objective(flat: FloatArray) -> tuple[float, FloatArray]:
        configuration = flat.reshape(shape)
        if not np.all(np.isfinite(configuration)):
            return math.nan, np.full(flat.shape, math.nan)
        try:
            value = total_energy(tri, measures, laws, configuration).total
            return value, energy_gradient(tri, measures, laws, configuration).ravel()
        except EnergyException:
            return math.nan, np.full(flat.shape, math.nan)

    return lbfgs_minimize(objective, start.ravel(), options)


def minimize_config(
    tri: Triangulation,
    measures: TriangleMeasures,
    laws: Laws,
    init: npt.ArrayLike,
    options: SolveOptions | None = None,
) -> MinimizeResult:
    """Minimize the discrete energy from init and from perturbed copies of it.

    The best result over all starts is returned with its mean subtracted.

    Raises:
        SolverException: If every start produced a non-finite energy
    """
    options = options or SolveOptions()
    init = np.asarray(init, dtype=float)
    if not np.all(np.isfinite(init)):
        raise ValueError("The initial configuration must be finite")

    lbfgs = options.lbfgs(measures.total_area)
    rngs = spawn_rngs(options.seed, options.starts)
    starts = [init] + [
        init + rng.uniform(-1, 1, size=init.shape) * options.noise * tri.epsilon
        for rng in rngs[1:]
    ]

    def run(start: FloatArray) -> LbfgsResult | None:
        try:
            return _solve(tri, measures, laws, start, lbfgs)
        except SolverException as ex:
            Log.warning(f"Start abandoned: {ex}")
            return None

    if options.threads > 1 and len(starts) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=options.threads) as executor:
            results = list(executor.map(run, starts))
    else:
        results = [run(start) for start in starts]

    finished = [(index, result) for index, result in enumerate(results) if result is not None]
    if not finished:
        raise SolverException("Every start produced a non-finite energy")
    best_index, best = min(finished, key=lambda item: (item[1].value, item[0]))

    configuration = best.x.reshape(init.shape)
    configuration = configuration - configuration.mean(axis=0)
    energy = total_energy(tri, measures, laws, configuration)
    diagnostics = Diagnostics(
        gradient_norm=best.gradient_norm,
        iterations=best.iterations,
        converged=best.converged,
        line_search_failed=best.line_search_failed,
        start_energies=[result.value if result else math.nan for result in results],
        best_start=best_index,
    )
    if best.line_search_failed:
        Log.warning(f"Line search failed; best energy {energy.total:.6e}")
    Log.info(
        f"Minimized {tri}: energy {energy.total:.6e}, gradient {best.gradient_norm:.3e}, "
        f"{best.iterations} iterations"
    )
    return MinimizeResult(configuration, energy, diagnostics)


def procrustes_alignment(
    configuration: npt.ArrayLike, reference: npt.ArrayLike
) -> tuple[FloatArray, float]:
    """Align a configuration to a reference by the best rotation and translation.

    Returns:
        The aligned configuration and the max distance to the reference
    """
    configuration = np.asarray(configuration, dtype=float)
    reference = np.asarray(reference, dtype=float)
    centered = configuration - configuration.mean(axis=0)
    target = reference - reference.mean(axis=0)
    dot = float(np.sum(centered * target))
    cross = float(np.sum(centered[:, 0] * target[:, 1] - centered[:, 1] * target[:, 0]))
    theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    aligned = centered @ np.array([[c, s], [-s, c]]) + reference.mean(axis=0)
    return aligned, float(np.max(np.linalg.norm(aligned - reference, axis=1)))


@dataclasses.dataclass(frozen=True)
class Problem:
    """Everything an epsilon sweep needs besides the scales."""

    chart: Chart
    frame: LatticeFrame
    g: MetricField
    laws: Laws
    measures: MeasureOptions = dataclasses.field(default_factory=MeasureOptions)
    offset: tuple[float, float] = (0.5, 0.5)


@dataclasses.dataclass
class SweepEntry:
    """One epsilon of a sweep."""

    epsilon: float
    n_vertices: int
    min_energy: float
    bond: float
    volume: float
    grad_norm: float
    iterations: int
    defect: float
    seconds: float
    converged: bool

    CSV_COLUMNS: ClassVar[tuple[str, ...]] = (
        "epsilon",
        "n_vertices",
        "min_energy",
        "bond",
        "volume",
        "grad_norm",
        "defect",
        "seconds",
    )


@dataclasses.dataclass
class SweepReport:
    """Sweep entries in decreasing epsilon, and the successive relative energy changes."""

    entries: list[SweepEntry]
    options: SolveOptions
    configurations: list[FloatArray] = dataclasses.field(default_factory=list, repr=False)

    @property
    def energies(self) -> list[float]:
        return [entry.min_energy for entry in self.entries]

    @property
    def relative_changes(self) -> list[float]:
        energies = self.energies
        return [
            abs(fine - coarse) / max(abs(coarse), 1e-300)
            for coarse, fine in zip(energies, energies[1:])
        ]

    def to_json(self) -> dict[str, Any]:
        return {
            "entries": [dataclasses.asdict(entry) for entry in self.entries],
            "relative_changes": self.relative_changes,
            "options": self.options.to_json(),
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SweepEntry.CSV_COLUMNS)
        for entry in self.entries:
            writer.writerow([repr(getattr(entry, column)) for column in SweepEntry.CSV_COLUMNS])
        return buffer.getvalue()


def warm_start(coarse: Triangulation, configuration: FloatArray, fine: Triangulation) -> FloatArray:
    """Sample the affine extension of a coarse configuration at the fine vertices."""
    return affine_extend(coarse, configuration).evaluate(fine.vertices)


def epsilon_sweep(
    problem: Problem,
    eps_list: list[float],
    options: SolveOptions | None = None,
    initial: str = "chart-identity",
    amplitude: float = 0.0,
) -> SweepReport:
    """Minimize at every epsilon, warm-starting each finer mesh from the previous minimizer.

    Raises:
        ValueError: If eps_list has fewer than 3 entries or is not strictly decreasing
    """
    options = options or SolveOptions()
    if len(eps_list) < 3:
        raise ValueError(f"An epsilon sweep needs at least 3 scales, got {len(eps_list)}")
    if any(fine >= coarse for coarse, fine in zip(eps_list, eps_list[1:])):
        raise ValueError(f"Scales must be strictly decreasing, got {eps_list}")

    entries: list[SweepEntry] = []
    configurations: list[FloatArray] = []
    previous: tuple[Triangulation, FloatArray] | None = None
    for epsilon in eps_list:
        started = time.perf_counter()
        tri = build_lattice(problem.chart, problem.frame, problem.g, epsilon, problem.offset)
        measures = compute_measures(tri, problem.g, problem.measures)
        if previous is None:
            init = initial_configuration(
                tri, initial, amplitude=amplitude, rng=np.random.default_rng(options.seed)
            )
        else:
            init = warm_start(previous[0], previous[1], tri)
        result = minimize_config(tri, measures, problem.laws, init, options)
        defect = coverage_defect(problem.chart, tri, problem.g, measures)
        entries.append(
            SweepEntry(
                epsilon=epsilon,
                n_vertices=tri.vertex_count,
                min_energy=result.energy.total,
                bond=result.energy.bond,
                volume=result.energy.volume,
                grad_norm=result.diagnostics.gradient_norm,
                iterations=result.diagnostics.iterations,
                defect=defect,
                seconds=time.perf_counter() - started,
                converged=result.diagnostics.converged,
            )
        )
        configurations.append(result.configuration)
        previous = (tri, result.configuration)
        Log.info(f"eps={epsilon}: min energy {result.energy.total:.6e}")

    return SweepReport(entries, options, configurations)
