"""Value parsers used by the deserialize-decorated config and document classes."""

import math
from typing import Any


def optional_float(value: int | float | None) -> float | None:
    """Convert an optional JSON number to a float.

    Args:
        value: Integer or float value or None

    Returns:
        Float conversion of the value or None if value is None

    Raises:
        ValueError: If the value is not a finite number
    """
    if value is None:
        return None

    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ValueError(f"Expected a number, got {value!r}")

    result = float(value)
    if not math.isfinite(result):
        raise ValueError(f"Expected a finite number, got {value!r}")

    return result


def float_vector(value: list[Any] | None) -> list[float] | None:
    """Convert an optional JSON array of two numbers to a 2-vector.

    Args:
        value: Array of two numbers or None

    Returns:
        The two entries as floats or None if value is None

    Raises:
        ValueError: If the array does not hold exactly two finite numbers
    """
    if value is None:
        return None

    if not isinstance(value, list) or len(value) != 2:
        raise ValueError(f"Expected an array of two numbers, got {value!r}")

    return [optional_float(entry) for entry in value]  # type: ignore[misc]


def float_list(value: list[Any] | None) -> list[float] | None:
    """Convert an optional JSON array of numbers to a list of floats."""
    if value is None:
        return None

    if not isinstance(value, list):
        raise ValueError(f"Expected an array of numbers, got {value!r}")

    return [optional_float(entry) for entry in value]  # type: ignore[misc]


def float_matrix(value: list[Any] | None) -> list[list[float]] | None:
    """Convert an optional JSON array of 2-vectors, e.g. vertex positions."""
    if value is None:
        return None

    if not isinstance(value, list):
        raise ValueError(f"Expected an array of pairs, got {value!r}")

    return [float_vector(row) for row in value]  # type: ignore[misc]


def _index(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"Expected a vertex index, got {value!r}")
    return value


def _tagged_rows(
    value: list[Any] | None, width: int, tags: dict[str, int]
) -> list[list[int]] | None:
    if value is None:
        return None

    if not isinstance(value, list):
        raise ValueError(f"Expected an array of rows, got {value!r}")

    rows = []
    for row in value:
        if not isinstance(row, list) or len(row) != width + 1:
            raise ValueError(f"Expected {width} indices and a tag, got {row!r}")
        if row[-1] not in tags:
            raise ValueError(f"Unknown tag {row[-1]!r}, expected one of {sorted(tags)}")
        rows.append([_index(entry) for entry in row[:-1]] + [tags[row[-1]]])
    return rows


def edge_rows(value: list[Any] | None) -> list[list[int]] | None:
    """Convert [i, j, axis] rows, axis one of "a", "b", "c", to [i, j, axis index].

    Raises:
        ValueError: If a row is malformed or its axis is unknown
    """
    return _tagged_rows(value, 2, {"a": 0, "b": 1, "c": 2})


def triangle_rows(value: list[Any] | None) -> list[list[int]] | None:
    """Convert [i, j, k, orient] rows, orient "+" or "-", to [i, j, k, +1 or -1].

    Raises:
        ValueError: If a row is malformed or its orientation is unknown
    """
    return _tagged_rows(value, 3, {"+": 1, "-": -1, "−": -1})
