"""Test the shared utilities."""

import math

import numpy as np
import pytest

from libincompat import utilities


def test_parse_eps_list():
    """Test that the parse_eps_list function parses correctly."""
    valid_test_cases = [
        ("0.2,0.1,0.05", [0.2, 0.1, 0.05]),
        ("0.5", [0.5]),
        (" 0.4 , 0.2 ", [0.4, 0.2]),
        ("1e-2,5e-3", [0.01, 0.005]),
    ]

    invalid_test_cases = [
        None,
        "",
        "0.2,,0.1",
        "0.2,",
        "a,b",
        "0.2,-0.1",
        "0",
        "inf",
        "nan",
    ]

    for input_string, expected in valid_test_cases:
        assert utilities.parse_eps_list(input_string) == expected

    for input_string in invalid_test_cases:
        with pytest.raises(ValueError):
            utilities.parse_eps_list(input_string)  # type: ignore[arg-type]


def test_parse_eps_list_messages():
    """Test the error messages of parse_eps_list."""
    with pytest.raises(ValueError, match="should not be None or empty"):
        utilities.parse_eps_list("")
    with pytest.raises(ValueError, match="got 'x'"):
        utilities.parse_eps_list("0.1,x")
    with pytest.raises(ValueError, match="must be positive"):
        utilities.parse_eps_list("0.1,-1")


def test_wedge():
    """Test the scalar cross product of single vectors and stacks."""
    assert utilities.wedge([1.0, 0.0], [0.0, 1.0]) == 1.0
    np.testing.assert_allclose(
        utilities.wedge([[1.0, 2.0], [3.0, 4.0]], [[2.0, 4.0], [1.0, 0.0]]), [0.0, -4.0]
    )


def test_rotation():
    """Test rotations are orthogonal with determinant one."""
    for theta in (0.0, 0.7, math.pi, -2.0):
        r = utilities.rotation(theta)
        np.testing.assert_allclose(r @ r.T, np.eye(2), atol=1e-15)
        assert np.linalg.det(r) == pytest.approx(1.0)
    np.testing.assert_allclose(utilities.rotation(math.pi / 2) @ [1.0, 0.0], [0.0, 1.0], atol=1e-15)


def test_spawn_rngs():
    """Test spawned streams are reproducible and distinct."""
    first = [rng.random() for rng in utilities.spawn_rngs(3, 4)]
    second = [rng.random() for rng in utilities.spawn_rngs(3, 4)]
    assert first == second
    assert len(set(first)) == 4
