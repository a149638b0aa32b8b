"""Tests for parser functions and edge cases."""

import math

import pytest

from libincompat.model.parsers import float_list, float_matrix, float_vector, optional_float


def test_optional_float_none():
    """Test optional_float with None input."""
    assert optional_float(None) is None


def test_optional_float_int():
    """Test optional_float converts integers."""
    result = optional_float(3)
    assert result == 3.0
    assert isinstance(result, float)


def test_optional_float_rejects_bool():
    """Test optional_float with a JSON boolean."""
    with pytest.raises(ValueError, match="Expected a number"):
        optional_float(True)


def test_optional_float_rejects_string():
    """Test optional_float with a string."""
    with pytest.raises(ValueError, match="Expected a number"):
        optional_float("1.5")  # type: ignore[arg-type]


def test_optional_float_rejects_infinity():
    """Test optional_float with a non-finite number."""
    with pytest.raises(ValueError, match="finite"):
        optional_float(math.inf)


def test_float_vector():
    """Test float_vector with valid and invalid arrays."""
    assert float_vector([1, 0.5]) == [1.0, 0.5]
    assert float_vector(None) is None
    with pytest.raises(ValueError, match="two numbers"):
        float_vector([1.0, 2.0, 3.0])


def test_float_list():
    """Test float_list with an array and a scalar."""
    assert float_list([0.2, 0.1]) == [0.2, 0.1]
    assert float_list([]) == []
    with pytest.raises(ValueError, match="array of numbers"):
        float_list(0.1)  # type: ignore[arg-type]


def test_float_matrix():
    """Test float_matrix with pairs and a malformed row."""
    assert float_matrix([[0, 1], [2, 3]]) == [[0.0, 1.0], [2.0, 3.0]]
    with pytest.raises(ValueError, match="two numbers"):
        float_matrix([[0, 1], [2]])
