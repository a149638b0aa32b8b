"""Pytest configuration and fixtures."""

from tests.context import (
    default_laws,
    euclidean_metric,
    hexagonal_frame,
    non_flat_metric,
    small_curved_mesh,
    small_flat_mesh,
)

__all__ = [
    "default_laws",
    "euclidean_metric",
    "hexagonal_frame",
    "non_flat_metric",
    "small_curved_mesh",
    "small_flat_mesh",
]
