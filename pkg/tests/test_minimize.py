"""Test energy minimization and epsilon sweeps."""

import math

import numpy as np
import pytest

from libincompat.energy import total_energy
from libincompat.exceptions import SolverException
from libincompat.field_expr import parse_field
from libincompat.geometry import Chart, DistanceOptions
from libincompat.minimize import (
    Problem,
    SolveOptions,
    SweepEntry,
    epsilon_sweep,
    initial_configuration,
    minimize_config,
    procrustes_alignment,
    warm_start,
)
from libincompat.triangulation import MeasureOptions, build_lattice
from libincompat.utilities import rotation

FAST = MeasureOptions(distance=DistanceOptions(fast=True))


def test_initial_configurations(small_flat_mesh):
    """Test every kind of starting configuration."""
    tri, _ = small_flat_mesh
    np.testing.assert_array_equal(initial_configuration(tri), tri.vertices)
    np.testing.assert_allclose(initial_configuration(tri, "scaled", factor=2.0), 2 * tri.vertices)
    noisy = initial_configuration(tri, "random", amplitude=0.01, rng=np.random.default_rng(1))
    assert 0 < np.max(np.abs(noisy - tri.vertices)) <= 0.01
    custom = initial_configuration(tri, "custom", custom=(parse_field("y"), parse_field("x")))
    np.testing.assert_allclose(custom, tri.vertices[:, ::-1])


def test_initial_configuration_errors(small_flat_mesh):
    """Test unknown kinds and a custom kind without expressions."""
    tri, _ = small_flat_mesh
    with pytest.raises(ValueError, match="Unknown initial configuration"):
        initial_configuration(tri, "spiral")
    with pytest.raises(ValueError, match="two expressions"):
        initial_configuration(tri, "custom")


def test_solve_option_validation():
    """Test invalid tolerances and start counts."""
    with pytest.raises(ValueError, match="gradient_tolerance"):
        SolveOptions(gradient_tolerance=0.0)
    with pytest.raises(ValueError, match="At least one start"):
        SolveOptions(starts=0)
    assert SolveOptions().lbfgs(2.0).gradient_tolerance == pytest.approx(2e-8)


def test_flat_minimizer_is_stress_free(small_flat_mesh, default_laws):
    """Test a perturbed identity relaxes to zero energy in the Euclidean metric."""
    tri, measures = small_flat_mesh
    init = initial_configuration(tri, "random", amplitude=0.02, rng=np.random.default_rng(3))
    result = minimize_config(tri, measures, default_laws, init, SolveOptions(starts=2))
    assert result.energy.total < 1e-10
    assert len(result.diagnostics.start_energies) == 2
    np.testing.assert_allclose(result.configuration.mean(axis=0), 0.0, atol=1e-12)


def test_curved_minimizer_lowers_the_energy(small_curved_mesh, default_laws):
    """Test minimization from the chart identity in a non-flat metric."""
    tri, measures = small_curved_mesh
    start = total_energy(tri, measures, default_laws, tri.vertices).total
    result = minimize_config(tri, measures, default_laws, tri.vertices, SolveOptions(starts=1))
    assert 0 < result.energy.total < start
    assert result.diagnostics.best_start == 0
    assert result.diagnostics.start_energies[0] == pytest.approx(result.energy.total)


def test_threads_do_not_change_the_result(small_curved_mesh, default_laws):
    """Test starts run in a thread pool give the same best configuration."""
    tri, measures = small_curved_mesh
    single = minimize_config(tri, measures, default_laws, tri.vertices, SolveOptions(starts=3))
    threaded = minimize_config(
        tri, measures, default_laws, tri.vertices, SolveOptions(starts=3, threads=3)
    )
    np.testing.assert_array_equal(single.configuration, threaded.configuration)
    assert single.diagnostics.best_start == threaded.diagnostics.best_start


def test_non_finite_initial_configuration(small_flat_mesh, default_laws):
    """Test NaN in the starting configuration."""
    tri, measures = small_flat_mesh
    init = tri.vertices.copy()
    init[0, 1] = math.nan
    with pytest.raises(ValueError, match="finite"):
        minimize_config(tri, measures, default_laws, init)


def test_collapsed_start_fails(small_flat_mesh, default_laws):
    """Test every start collapsing to a point is reported."""
    tri, measures = small_flat_mesh
    with pytest.raises(SolverException, match="non-finite"):
        minimize_config(
            tri, measures, default_laws, np.zeros_like(tri.vertices), SolveOptions(noise=0.0)
        )


def test_procrustes_alignment():
    """Test the best rigid motion is recovered."""
    rng = np.random.default_rng(8)
    reference = rng.normal(size=(20, 2))
    moved = reference @ rotation(1.3).T + np.array([2.0, -4.0])
    aligned, error = procrustes_alignment(moved, reference)
    np.testing.assert_allclose(aligned, reference, atol=1e-12)
    assert error == pytest.approx(0.0, abs=1e-12)


def test_warm_start_is_exact_for_affine_maps(hexagonal_frame):
    """Test warm starting from an affine coarse configuration."""
    chart = Chart.unit_square()
    coarse = build_lattice(chart, hexagonal_frame, None, 0.25)
    fine = build_lattice(chart, hexagonal_frame, None, 0.125)
    linear = np.array([[1.0, 0.5], [0.0, 2.0]])
    values = warm_start(coarse, coarse.vertices @ linear.T, fine)
    np.testing.assert_allclose(values, fine.vertices @ linear.T, atol=1e-12)


def test_sweep_argument_checks(hexagonal_frame, euclidean_metric, default_laws):
    """Test sweeps need three strictly decreasing scales."""
    problem = Problem(Chart.unit_square(), hexagonal_frame, euclidean_metric, default_laws, FAST)
    with pytest.raises(ValueError, match="at least 3"):
        epsilon_sweep(problem, [0.5, 0.25])
    with pytest.raises(ValueError, match="strictly decreasing"):
        epsilon_sweep(problem, [0.5, 0.25, 0.25])


def test_flat_sweep(hexagonal_frame, euclidean_metric, default_laws):
    """Test a Euclidean sweep stays stress free and writes its table."""
    problem = Problem(Chart.unit_square(), hexagonal_frame, euclidean_metric, default_laws, FAST)
    report = epsilon_sweep(problem, [0.4, 0.3, 0.25], SolveOptions(starts=1))
    assert [entry.epsilon for entry in report.entries] == [0.4, 0.3, 0.25]
    assert all(energy < 1e-10 for energy in report.energies)
    assert len(report.relative_changes) == 2
    assert len(report.configurations) == 3

    lines = report.to_csv().splitlines()
    assert lines[0] == ",".join(SweepEntry.CSV_COLUMNS)
    assert len(lines) == 4
    assert report.to_json()["options"]["starts"] == 1


def test_curved_sweep_warm_starts(hexagonal_frame, non_flat_metric, default_laws):
    """Test energies and vertex counts of a sweep in a non-flat metric."""
    problem = Problem(Chart.unit_square(), hexagonal_frame, non_flat_metric, default_laws, FAST)
    report = epsilon_sweep(problem, [0.4, 0.3, 0.25], SolveOptions(starts=1))
    counts = [entry.n_vertices for entry in report.entries]
    assert counts == sorted(counts)
    assert all(entry.min_energy > 0 for entry in report.entries)
    assert all(0 <= entry.defect < 1 for entry in report.entries)
