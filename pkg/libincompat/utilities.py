"""Utility classes and methods shared across the libincompat modules."""

import logging
import math
from typing import Final

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

EPS_LIST_SEPARATOR: Final[str] = ","
MIN_EPS_LIST_LENGTH: Final[int] = 1

FloatArray = npt.NDArray[np.float64]


def parse_eps_list(input_string: str) -> list[float]:
    """Parse a comma separated list of lattice scales, e.g. "0.2,0.1,0.05".

    Args:
        input_string: Comma separated positive numbers

    Returns:
        The parsed scales in the order given

    Raises:
        ValueError: If input is None, empty, or contains non-positive or non-numeric entries
    """

    if not input_string:
        raise ValueError("The input string should not be None or empty.")

    components = [component.strip() for component in input_string.split(EPS_LIST_SEPARATOR)]

    if len(components) < MIN_EPS_LIST_LENGTH or any(not c for c in components):
        raise ValueError("The input string should be of the format 0.2,0.1,0.05.")

    values = []

    for component in components:
        try:
            value = float(component)
        except ValueError as ex:
            raise ValueError(
                f"The input string should be of the format 0.2,0.1,0.05, got {component!r}."
            ) from ex

        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"Lattice scales must be positive, got {value}.")

        values.append(value)

    return values


def wedge(u: npt.ArrayLike, v: npt.ArrayLike) -> FloatArray:
    """Scalar cross product u ∧ v of (stacks of) 2-vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def rotation(theta: float) -> FloatArray:
    """The Euclidean rotation matrix by the angle theta."""
    c = math.cos(theta)
    s = math.sin(theta)
    return np.array([[c, -s], [s, c]])


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent, seed-derived random streams, one per parallel task."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]


class Log:
    """Logging wrapper class used throughout the library."""

    @staticmethod
    def info(message: str) -> None:
        """Log an info level log message."""
        logger.info(message)

    @staticmethod
    def debug(message: str) -> None:
        """Log a debug level log message."""
        logger.debug(message)

    @staticmethod
    def warning(message: str) -> None:
        """Log a warning level log message."""
        logger.warning(message)

    @staticmethod
    def error(message: str) -> None:
        """Log an error level log message."""
        logger.error(message)
