"""Test the L-BFGS minimizer."""

import numpy as np
import pytest

from libincompat.exceptions import SolverException
from libincompat.optimizer import LbfgsOptions, lbfgs_minimize


def _quadratic(x):
    scales = np.arange(1, len(x) + 1, dtype=float)
    return float(np.sum(scales * (x - 1) ** 2)), 2 * scales * (x - 1)


def _rosenbrock(x):
    value = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    gradient = np.array(
        [-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)]
    )
    return float(value), gradient


def test_quadratic_minimum():
    """Test convergence to the minimizer of a separable quadratic."""
    result = lbfgs_minimize(_quadratic, np.zeros(5), LbfgsOptions(gradient_tolerance=1e-10))
    assert result.converged
    assert not result.line_search_failed
    np.testing.assert_allclose(result.x, 1.0, atol=1e-9)
    assert result.value == pytest.approx(0.0, abs=1e-18)


def test_rosenbrock():
    """Test the curved valley of the Rosenbrock function."""
    options = LbfgsOptions(max_iterations=500, gradient_tolerance=1e-8)
    result = lbfgs_minimize(_rosenbrock, np.array([-1.2, 1.0]), options)
    assert result.converged
    np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-6)


def test_values_are_nonincreasing():
    """Test that accepted objective values never increase."""
    result = lbfgs_minimize(_rosenbrock, np.array([-1.2, 1.0]))
    assert all(later <= earlier for earlier, later in zip(result.values, result.values[1:]))
    assert result.values[0] == pytest.approx(24.2)


def test_starting_point_is_not_modified():
    """Test x0 is copied."""
    x0 = np.zeros(3)
    lbfgs_minimize(_quadratic, x0)
    np.testing.assert_array_equal(x0, 0.0)


def test_iteration_cap():
    """Test max_iterations stops the run without convergence."""
    result = lbfgs_minimize(_rosenbrock, np.array([-1.2, 1.0]), LbfgsOptions(max_iterations=3))
    assert result.iterations == 3
    assert not result.converged


def test_relative_tolerance_stops_early():
    """Test the relative decrease criterion."""
    options = LbfgsOptions(gradient_tolerance=0.0, relative_tolerance=1e-3)
    result = lbfgs_minimize(_rosenbrock, np.array([-1.2, 1.0]), options)
    assert result.converged
    assert result.iterations < 500


def test_non_finite_start():
    """Test a non-finite objective at x0 raises."""

    def objective(x):
        return float("nan"), np.zeros_like(x)

    with pytest.raises(SolverException, match="not finite"):
        lbfgs_minimize(objective, np.zeros(2))


def test_line_search_failure_is_reported():
    """Test an objective with a wrong gradient ends with line_search_failed."""

    def objective(x):
        return float(np.sum(x**2)), -2 * x

    result = lbfgs_minimize(objective, np.ones(2), LbfgsOptions(max_backtracks=5))
    assert result.line_search_failed
    assert not result.converged
    np.testing.assert_allclose(result.x, 1.0)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"max_iterations": -1}, "max_iterations"),
        ({"gradient_tolerance": -1.0}, "non-negative"),
        ({"sufficient_decrease": 1.0}, "sufficient_decrease"),
        ({"backtrack": 0.0}, "backtrack"),
        ({"history": 0}, "history"),
    ],
)
def test_invalid_options(kwargs, message):
    """Test option validation."""
    with pytest.raises(ValueError, match=message):
        LbfgsOptions(**kwargs)
