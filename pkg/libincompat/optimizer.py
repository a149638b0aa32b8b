"""Limited-memory BFGS with a backtracking Armijo line search.

Shared by the configuration minimizer, the QW estimator and the distance relaxation.
"""

import dataclasses
import math
from typing import Callable

import numpy as np

from libincompat.exceptions import SolverException
from libincompat.utilities import FloatArray, Log

Objective = Callable[[FloatArray], tuple[float, FloatArray]]


@dataclasses.dataclass(frozen=True)
class LbfgsOptions:
    """Stopping rules and line-search parameters."""

    max_iterations: int = 1000
    gradient_tolerance: float = 1e-8
    relative_tolerance: float = 0.0
    sufficient_decrease: float = 1e-4
    backtrack: float = 0.5
    history: int = 10
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be non-negative, got {self.max_iterations}")
        if self.gradient_tolerance < 0 or self.relative_tolerance < 0:
            raise ValueError("Tolerances must be non-negative")
        if not 0 < self.sufficient_decrease < 1:
            raise ValueError(
                f"sufficient_decrease must lie in (0, 1), got {self.sufficient_decrease}"
            )
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack}")
        if self.history < 1:
            raise ValueError(f"history must be at least 1, got {self.history}")


@dataclasses.dataclass
class LbfgsResult:
    """Final iterate of a run, with the accepted objective values in order."""

    x: FloatArray
    value: float
    gradient: FloatArray
    iterations: int
    converged: bool
    line_search_failed: bool
    values: list[float]

    @property
    def gradient_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


def _two_loop(
    gradient: FloatArray, steps: list[FloatArray], changes: list[FloatArray]
) -> FloatArray:
    """Apply the inverse Hessian approximation to the gradient."""
    q = gradient.copy()
    alphas = []
    rhos = [1.0 / float(np.dot(y, s)) for s, y in zip(steps, changes)]
    for s, y, rho in zip(reversed(steps), reversed(changes), reversed(rhos)):
        alpha = rho * float(np.dot(s, q))
        alphas.append(alpha)
        q -= alpha * y
    if steps:
        s, y = steps[-1], changes[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
    for (s, y, rho), alpha in zip(zip(steps, changes, rhos), reversed(alphas)):
        beta = rho * float(np.dot(y, q))
        q += (alpha - beta) * s
    return -q


def lbfgs_minimize(
    objective: Objective, x0: FloatArray, options: LbfgsOptions | None = None
) -> LbfgsResult:
    """Minimize a smooth objective returning (value, gradient).

    The accepted values are nonincreasing. A failed line search first resets the curvature history
    and retries along the steepest descent direction; a second failure stops the run with
    line_search_failed set.

    Args:
        objective: Callable returning the value and gradient at a point
        x0: Starting point (not modified)
        options: Solver settings

    Returns:
        The best iterate found

    Raises:
        SolverException: If the objective is not finite at the starting point
    """

    options = options or LbfgsOptions()
    x = np.array(x0, dtype=float)
    value, gradient = objective(x)
    value = float(value)
    if not math.isfinite(value) or not np.all(np.isfinite(gradient)):
        raise SolverException(f"Objective is not finite at the starting point (value {value})")

    steps: list[FloatArray] = []
    changes: list[FloatArray] = []
    values = [value]
    converged = False
    line_search_failed = False
    iteration = 0

    while iteration < options.max_iterations:
        if float(np.linalg.norm(gradient)) <= options.gradient_tolerance:
            converged = True
            break

        direction = _two_loop(gradient, steps, changes)
        slope = float(np.dot(direction, gradient))
        if not steps or slope >= 0:
            steps.clear()
            changes.clear()
            direction = -gradient / max(1.0, float(np.linalg.norm(gradient)))
            slope = float(np.dot(direction, gradient))

        accepted = _backtrack(objective, x, value, direction, slope, options)
        if accepted is None and steps:
            Log.debug(f"Line search failed at iteration {iteration}, resetting history")
            steps.clear()
            changes.clear()
            direction = -gradient / max(1.0, float(np.linalg.norm(gradient)))
            slope = float(np.dot(direction, gradient))
            accepted = _backtrack(objective, x, value, direction, slope, options)

        if accepted is None:
            line_search_failed = True
            Log.warning(f"Line search failed at iteration {iteration} with value {value:.6e}")
            break

        new_x, new_value, new_gradient = accepted
        s = new_x - x
        y = new_gradient - gradient
        curvature = float(np.dot(s, y))
        if curvature > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            steps.append(s)
            changes.append(y)
            if len(steps) > options.history:
                steps.pop(0)
                changes.pop(0)

        decrease = value - new_value
        x, value, gradient = new_x, new_value, new_gradient
        values.append(value)
        iteration += 1

        if options.relative_tolerance > 0 and decrease <= options.relative_tolerance * max(
            abs(value), 1e-300
        ):
            converged = True
            break

    if iteration >= options.max_iterations and not converged:
        converged = float(np.linalg.norm(gradient)) <= options.gradient_tolerance

    Log.debug(
        f"L-BFGS finished after {iteration} iterations: value {value:.6e}, "
        f"gradient norm {float(np.linalg.norm(gradient)):.3e}, converged {converged}"
    )
    return LbfgsResult(x, value, gradient, iteration, converged, line_search_failed, values)


def _backtrack(
    objective: Objective,
    x: FloatArray,
    value: float,
    direction: FloatArray,
    slope: float,
    options: LbfgsOptions,
) -> tuple[FloatArray, float, FloatArray] | None:
    """Armijo backtracking from a unit step; None when no step decreases enough."""
    step = 1.0
    for _ in range(options.max_backtracks):
        candidate = x + step * direction
        candidate_value, candidate_gradient = objective(candidate)
        candidate_value = float(candidate_value)
        if (
            math.isfinite(candidate_value)
            and candidate_value <= value + options.sufficient_decrease * step * slope
            and np.all(np.isfinite(candidate_gradient))
        ):
            return candidate, candidate_value, candidate_gradient
        step *= options.backtrack
    return None
