"""Test the property suites."""

import math

import numpy as np
import pytest

from libincompat.validation import (
    SUITE_NAMES,
    SuiteResult,
    conformal_suite,
    continuum_suite,
    distance_slope,
    energy_suite,
    fiber_suite,
    gradient_error,
    non_flat_metric,
    run_suites,
    three_norm_constant,
)


def test_three_norm_constant_for_equal_lengths():
    """Test the constant reduces to 2 / (1 - cos theta) when |x| = |y|."""
    theta = np.array([0.3, math.pi / 2, 2.5])
    np.testing.assert_allclose(three_norm_constant(np.ones(3), theta), 2 / (1 - np.cos(theta)))


def test_three_norm_constant_grows_with_the_length_ratio():
    """Test the constant is never below the equal-length one."""
    theta = np.full(4, 1.0)
    values = three_norm_constant(np.array([1.0, 1.5, 3.0, 10.0]), theta)
    assert np.all(values >= 2 / (1 - math.cos(1.0)) - 1e-12)


def test_fiber_inequalities():
    """Test the fiber inequalities hold on a small sample."""
    result = fiber_suite(seed=1, trials=2000)
    details = result.details
    assert result.name == "appendix"
    assert details["isometry_violations"] == 0
    assert details["equal_length_violations"] == 0
    assert details["ratio_constant_violations"] == 0
    assert details["det_gap_violations"] == 0
    assert details["det_gap_equality_violations"] == 0
    assert details["singular_value_order_violations"] == 0
    assert details["closed_form_max_mismatch"] <= 1e-10
    assert math.isfinite(details["elongation_constant_max"])


def test_distance_error_is_quadratic():
    """Test |d(p, p + v) - |v|_g| decays like |v|^2."""
    slope, lengths, errors = distance_slope(non_flat_metric())
    assert slope >= 1.9
    assert len(lengths) == len(errors)


def test_gradient_error_is_small(small_curved_mesh, default_laws):
    """Test the gradient oracle on a perturbed configuration."""
    tri, measures = small_curved_mesh
    rng = np.random.default_rng(0)
    f = tri.vertices + rng.normal(scale=0.01, size=tri.vertices.shape)
    assert gradient_error(tri, measures, default_laws, f) < 1e-6


def test_energy_suite():
    """Test the energy suite passes with a few pairs."""
    result = energy_suite(seed=0, pairs=2)
    assert result.passed, result.details
    assert result.details["local"]
    assert result.details["laws"]["hencky_rejected"]


def test_continuum_suite():
    """Test the continuum suite passes on a reduced sample."""
    result = continuum_suite(seed=0, samples=400)
    assert result.passed, result.details
    assert result.details["zero_set_mismatches"] == 0


def test_conformal_suite():
    """Test the symmetry suite and its non-conformal control."""
    result = conformal_suite(seed=0, samples=100)
    assert result.passed, result.details
    assert result.details["non_conformal_skipped"]


def test_suite_result_str():
    """Test the suite summary."""
    assert str(SuiteResult("energy", True, {})) == "SuiteResult<energy: passed>"
    assert str(SuiteResult("energy", False, {})) == "SuiteResult<energy: FAILED>"


def test_unknown_suite():
    """Test selecting a suite that does not exist."""
    assert "appendix" in SUITE_NAMES
    with pytest.raises(ValueError, match="Unknown suite"):
        run_suites("everything")
