"""Discrete bond and signed-volume energies of a lattice configuration."""

import dataclasses
import enum
from typing import Any, ClassVar, NamedTuple

import numpy as np
import numpy.typing as npt

from libincompat.exceptions import EnergyException
from libincompat.field_expr import ScalarFieldExpr
from libincompat.triangulation import TriangleMeasures, Triangulation
from libincompat.utilities import FloatArray, Log, wedge


class BondKind(enum.Enum):
    """Bond law families."""

    HOOKEAN = "hookean"
    CUSTOM = "custom"


class VolumeKind(enum.Enum):
    """Volume law families. NONE switches the volume term off."""

    ABS = "abs"
    HUBER = "huber"
    NONE = "none"


def huber(x: npt.ArrayLike, delta: float) -> FloatArray:
    """x^2 / (2 delta) for |x| <= delta, |x| - delta / 2 beyond."""
    magnitude = np.abs(np.asarray(x, dtype=float))
    return np.where(magnitude <= delta, magnitude**2 / (2 * delta), magnitude - delta / 2)


def huber_derivative(x: npt.ArrayLike, delta: float) -> FloatArray:
    x = np.asarray(x, dtype=float)
    return np.clip(x / delta, -1.0, 1.0)


@dataclasses.dataclass(frozen=True)
class BondLaw:
    """Phi(r) of the relative edge elongation r, with its declared structural constants.

    Custom laws are expressions in the variable x standing for r.
    """

    kind: BondKind = BondKind.HOOKEAN
    expression: ScalarFieldExpr | None = None
    alpha: float = 1.0
    growth: float = 1.0
    lipschitz: float = 1.0

    def __post_init__(self) -> None:
        if self.kind == BondKind.CUSTOM and self.expression is None:
            raise ValueError("A custom bond law needs an expression in x")

    @staticmethod
    def hookean() -> "BondLaw":
        """Phi(r) = (r - 1)^2."""
        return BondLaw()

    @staticmethod
    def custom(
        expression: ScalarFieldExpr,
        alpha: float = 1.0,
        growth: float = 1.0,
        lipschitz: float = 1.0,
    ) -> "BondLaw":
        return BondLaw(BondKind.CUSTOM, expression, alpha, growth, lipschitz)

    def value(self, r: npt.ArrayLike) -> FloatArray:
        r = np.asarray(r, dtype=float)
        if self.kind == BondKind.HOOKEAN:
            return (r - 1) ** 2
        assert self.expression is not None
        return np.asarray(self.expression.evaluate(r, np.zeros_like(r)), dtype=float)

    def derivative(self, r: npt.ArrayLike) -> FloatArray:
        r = np.asarray(r, dtype=float)
        if self.kind == BondKind.HOOKEAN:
            return 2 * (r - 1)
        assert self.expression is not None
        slope = ScalarFieldExpr.from_ast(self.expression.gradient_ast[0])
        return np.asarray(
            np.broadcast_to(slope.evaluate(r, np.zeros_like(r)), r.shape), dtype=float
        )

    def __str__(self) -> str:
        if self.kind == BondKind.HOOKEAN:
            return "BondLaw<(x - 1)^2>"
        return f"BondLaw<{self.expression}>"


@dataclasses.dataclass(frozen=True)
class VolumeLaw:
    """Psi(a) of the normalized signed area ratio a, with its declared structural constants."""

    kind: VolumeKind = VolumeKind.HUBER
    beta: float = 1.0
    delta: float = 1e-3
    alpha: float | None = None
    growth: float | None = None
    lipschitz: float | None = None

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.kind == VolumeKind.HUBER and not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def declared(self) -> tuple[float, float, float]:
        """(alpha_Psi, C_Psi, L_Psi); unset ones default to beta / 2, beta and beta."""
        return (
            self.alpha if self.alpha is not None else self.beta / 2,
            self.growth if self.growth is not None else self.beta,
            self.lipschitz if self.lipschitz is not None else self.beta,
        )

    def value(self, a: npt.ArrayLike) -> FloatArray:
        a = np.asarray(a, dtype=float)
        if self.kind == VolumeKind.ABS:
            return self.beta * np.abs(a - 1)
        if self.kind == VolumeKind.HUBER:
            return self.beta * huber(a - 1, self.delta)
        return np.zeros_like(a)

    def derivative(self, a: npt.ArrayLike) -> FloatArray:
        a = np.asarray(a, dtype=float)
        if self.kind == VolumeKind.ABS:
            return self.beta * np.sign(a - 1)
        if self.kind == VolumeKind.HUBER:
            return self.beta * huber_derivative(a - 1, self.delta)
        return np.zeros_like(a)

    def __str__(self) -> str:
        return f"VolumeLaw<{self.kind.value}, beta={self.beta}, delta={self.delta}>"


class Laws(NamedTuple):
    """The bond and volume laws of a model."""

    bond: BondLaw
    volume: VolumeLaw

    @staticmethod
    def default() -> "Laws":
        """Hookean bonds with the Huber-smoothed volume penalty."""
        return Laws(BondLaw(), VolumeLaw())


@dataclasses.dataclass
class EnergyBreakdown:
    """Bond and volume parts of the discrete energy."""

    bond: float
    volume: float
    per_edge: FloatArray | None = None
    per_triangle: FloatArray | None = None

    @property
    def total(self) -> float:
        return self.bond + self.volume

    def to_json(self) -> dict[str, Any]:
        return {"bond": self.bond, "volume": self.volume, "total": self.total}

    def __str__(self) -> str:
        return (
            f"EnergyBreakdown<total={self.total:.6e}: "
            f"bond={self.bond:.6e}, volume={self.volume:.6e}>"
        )


def _check_configuration(tri: Triangulation, f: npt.ArrayLike) -> FloatArray:
    f = np.asarray(f, dtype=float)
    if f.shape != (tri.vertex_count, 2):
        raise ValueError(f"Configuration has shape {f.shape}, expected ({tri.vertex_count}, 2)")
    if not np.all(np.isfinite(f)):
        raise ValueError("Configuration contains non-finite values")
    return f


def elongations(
    tri: Triangulation, measures: TriangleMeasures, f: FloatArray
) -> tuple[FloatArray, FloatArray]:
    """Edge vectors f(q) - f(p) and the ratios |f(q) - f(p)| / d(p, q)."""
    if np.any(measures.distances <= 0):
        edge = int(np.argmin(measures.distances))
        raise EnergyException(f"Edge {edge} has zero cached distance")
    vectors = f[tri.edges[:, 1]] - f[tri.edges[:, 0]]
    return vectors, np.linalg.norm(vectors, axis=1) / measures.distances


def area_ratios(
    tri: Triangulation, measures: TriangleMeasures, f: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Triangle side vectors u = f(q) - f(p), v = f(r) - f(q) and s u ∧ v / (eps^2 nu).

    s is the sign of the chart area of the stored triangle, so the ratio is +1 at a g-isometry
    whatever the handedness of the frame.
    """
    if np.any(measures.nu_centroid <= 0):
        raise EnergyException(f"Triangle {int(np.argmin(measures.nu_centroid))} has nu <= 0")
    p, q, r = tri.triangles.T
    u = f[q] - f[p]
    v = f[r] - f[q]
    return u, v, tri.signs * wedge(u, v) / (tri.epsilon**2 * measures.nu_centroid)


def bond_contributions(
    tri: Triangulation, measures: TriangleMeasures, law: BondLaw, f: npt.ArrayLike
) -> FloatArray:
    """Per-edge terms mu(p, q) Phi(|f(q) - f(p)| / d(p, q)).

    Raises:
        EnergyException: If an edge has zero cached distance
    """
    f = _check_configuration(tri, f)
    _, ratios = elongations(tri, measures, f)
    return measures.mu_edge * law.value(ratios)


def bond_energy(
    tri: Triangulation, measures: TriangleMeasures, law: BondLaw, f: npt.ArrayLike
) -> float:
    """Sum over edges of mu(p, q) Phi(|f(q) - f(p)| / d(p, q))."""
    return float(np.sum(bond_contributions(tri, measures, law, f)))


def volume_contributions(
    tri: Triangulation, measures: TriangleMeasures, law: VolumeLaw, f: npt.ArrayLike
) -> FloatArray:
    """Per-triangle terms mu(p, q, r) Psi(s (f(q) - f(p)) ∧ (f(r) - f(q)) / (eps^2 nu)).

    Raises:
        EnergyException: If a stored nu is not positive
    """
    f = _check_configuration(tri, f)
    _, _, ratios = area_ratios(tri, measures, f)
    return measures.mu * law.value(ratios)


def volume_energy(
    tri: Triangulation, measures: TriangleMeasures, law: VolumeLaw, f: npt.ArrayLike
) -> float:
    """Sum over triangles of the signed-volume penalty."""
    return float(np.sum(volume_contributions(tri, measures, law, f)))


def total_energy(
    tri: Triangulation,
    measures: TriangleMeasures,
    laws: Laws,
    f: npt.ArrayLike,
    detail: bool = False,
) -> EnergyBreakdown:
    """Bond plus volume energy, optionally with the per-edge and per-triangle terms."""
    per_edge = bond_contributions(tri, measures, laws.bond, f)
    per_triangle = volume_contributions(tri, measures, laws.volume, f)
    breakdown = EnergyBreakdown(float(np.sum(per_edge)), float(np.sum(per_triangle)))
    if detail:
        breakdown.per_edge = per_edge
        breakdown.per_triangle = per_triangle
    return breakdown


def energy_gradient(
    tri: Triangulation, measures: TriangleMeasures, laws: Laws, f: npt.ArrayLike
) -> FloatArray:
    """dE/df(v) for every vertex; shape (N, 2).

    Raises:
        EnergyException: If an edge has collapsed to zero length under f
    """
    f = _check_configuration(tri, f)
    gradient = np.zeros_like(f)

    vectors, ratios = elongations(tri, measures, f)
    lengths = np.linalg.norm(vectors, axis=1)
    if np.any(lengths == 0):
        edge = int(np.argmin(lengths))
        raise EnergyException(f"Edge {edge} has zero length under the configuration")
    scale = measures.mu_edge * laws.bond.derivative(ratios) / (measures.distances * lengths)
    edge_force = scale[:, None] * vectors
    np.add.at(gradient, tri.edges[:, 1], edge_force)
    np.add.at(gradient, tri.edges[:, 0], -edge_force)

    if laws.volume.kind != VolumeKind.NONE:
        u, v, area = area_ratios(tri, measures, f)
        scale_area = tri.epsilon**2 * measures.nu_centroid
        weight = tri.signs * measures.mu * laws.volume.derivative(area) / scale_area
        # d(u ∧ v)/du = (v1, -v0), d(u ∧ v)/dv = (-u1, u0)
        by_u = np.stack([v[:, 1], -v[:, 0]], axis=1)
        by_v = np.stack([-u[:, 1], u[:, 0]], axis=1)
        p, q, r = tri.triangles.T
        np.add.at(gradient, p, -weight[:, None] * by_u)
        np.add.at(gradient, q, weight[:, None] * (by_u - by_v))
        np.add.at(gradient, r, weight[:, None] * by_v)

    return gradient


@dataclasses.dataclass(frozen=True)
class LawGrid:
    """Sampling used by validate_laws."""

    count: int = 2001
    r_min: float = 1e-3
    r_max: float = 1e3
    a_max: float = 1e3
    pairs: int = 4000
    seed: int = 0
    slack: float = 1e-12


@dataclasses.dataclass(frozen=True)
class LawViolation:
    """One failed structural condition at a sample location."""

    condition: str
    location: tuple[float, ...]
    lhs: float
    rhs: float

    def __str__(self) -> str:
        where = ", ".join(f"{value:.6g}" for value in self.location)
        return f"{self.condition} violated at ({where}): {self.lhs:.6g} vs {self.rhs:.6g}"


@dataclasses.dataclass
class LawReport:
    """Violations found by validate_laws, grouped by condition."""

    law: str
    violations: list[LawViolation]

    class Constants:
        """Report limits."""

        MAX_PER_CONDITION: ClassVar[int] = 20

    @property
    def passed(self) -> bool:
        return not self.violations

    def conditions(self) -> set[str]:
        return {violation.condition for violation in self.violations}

    def to_json(self) -> dict[str, Any]:
        return {
            "law": self.law,
            "passed": self.passed,
            "violations": [
                {"condition": v.condition, "location": list(v.location), "lhs": v.lhs, "rhs": v.rhs}
                for v in self.violations
            ],
        }


def _collect(
    violations: list[LawViolation],
    condition: str,
    failed: npt.NDArray[np.bool_],
    locations: tuple[FloatArray, ...],
    lhs: FloatArray,
    rhs: FloatArray,
) -> None:
    for index in np.flatnonzero(failed)[: LawReport.Constants.MAX_PER_CONDITION]:
        violations.append(
            LawViolation(
                condition,
                tuple(float(location[index]) for location in locations),
                float(lhs[index]),
                float(rhs[index]),
            )
        )


def _symmetric_grid(grid: LawGrid) -> FloatArray:
    positive = np.geomspace(grid.r_min, grid.a_max, grid.count // 2)
    near_one = np.linspace(0.5, 1.5, 101)
    return np.unique(np.concatenate([-positive, [0.0], positive, near_one]))


def validate_laws(law: BondLaw | VolumeLaw, grid: LawGrid | None = None) -> LawReport:
    """Sample the structural conditions of a law and report every violation.

    Bond laws: Phi(1) = 0, coercivity Phi(r) >= alpha (r - 1)^2, growth Phi(r) <= C (1 + r^2),
    Lipschitz |Phi(r) - Phi(s)| <= L (1 + r + s) |r - s|, on a log-spaced grid of r.

    Volume laws: Psi(a) = 0 exactly at a = 1, coercivity Psi(a) > alpha sqrt(|a|) for a < 0,
    growth Psi(a) <= C (1 + |a|), Lipschitz |Psi(a) - Psi(b)| <= L |a - b|.
    """
    grid = grid or LawGrid()
    rng = np.random.default_rng(grid.seed)
    violations: list[LawViolation] = []
    one = np.array([1.0])
    zero = np.zeros(1)

    if isinstance(law, BondLaw):
        r = np.unique(np.concatenate([np.geomspace(grid.r_min, grid.r_max, grid.count), [1.0]]))
        values = law.value(r)
        at_one = law.value(one)
        _collect(violations, "zero at 1", np.abs(at_one) > grid.slack, (one,), at_one, zero)
        bound = law.alpha * (r - 1) ** 2
        _collect(violations, "coercivity", values < bound - grid.slack, (r,), values, bound)
        bound = law.growth * (1 + r**2)
        _collect(violations, "growth", values > bound + grid.slack, (r,), values, bound)
        s = rng.choice(r, size=grid.pairs)
        t = rng.choice(r, size=grid.pairs)
        lhs = np.abs(law.value(s) - law.value(t))
        bound = law.lipschitz * (1 + s + t) * np.abs(s - t)
        _collect(violations, "lipschitz", lhs > bound * (1 + 1e-9) + grid.slack, (s, t), lhs, bound)
        report = LawReport(str(law), violations)
    else:
        alpha, growth, lipschitz = law.declared
        a = _symmetric_grid(grid)
        values = law.value(a)
        off_one = np.abs(a - 1) > grid.slack
        zeros = np.zeros_like(a)
        _collect(violations, "zero only at 1", off_one & (values <= 0), (a,), values, zeros)
        at_one = law.value(one)
        _collect(violations, "zero only at 1", np.abs(at_one) > grid.slack, (one,), at_one, zero)
        negative = a < 0
        bound = alpha * np.sqrt(np.abs(a))
        _collect(violations, "coercivity", negative & (values <= bound), (a,), values, bound)
        bound = growth * (1 + np.abs(a))
        _collect(violations, "growth", values > bound + grid.slack, (a,), values, bound)
        s = rng.choice(a, size=grid.pairs)
        t = rng.choice(a, size=grid.pairs)
        lhs = np.abs(law.value(s) - law.value(t))
        bound = lipschitz * np.abs(s - t)
        _collect(violations, "lipschitz", lhs > bound * (1 + 1e-9) + grid.slack, (s, t), lhs, bound)
        report = LawReport(str(law), violations)

    if not report.passed:
        conditions = sorted(report.conditions())
        Log.info(f"{report.law}: {len(report.violations)} violations of {conditions}")
    return report

