"""JSON documents for triangulations."""

import json
import os
from typing import Any, ClassVar

import deserialize
import numpy as np

from libincompat.exceptions import MeshException
from libincompat.geometry import LatticeFrame
from libincompat.model.parsers import (
    edge_rows,
    float_matrix,
    float_vector,
    optional_float,
    triangle_rows,
)
from libincompat.triangulation import AXIS_NAMES, AXIS_STEPS, MINUS, PLUS, Triangulation
from libincompat.utilities import FloatArray, Log, wedge

# Lattice offsets of the corners of each cell class, relative to the cell's lower corner, in the
# stored vertex order.
_CELL_CORNERS: dict[int, tuple[tuple[int, int], ...]] = {
    PLUS: ((0, 0), (1, 0), (1, 1)),
    MINUS: ((1, 1), (0, 1), (0, 0)),
}


@deserialize.parser("epsilon", optional_float)
@deserialize.parser("a", float_vector)
@deserialize.parser("b", float_vector)
@deserialize.parser("origin", float_vector)
@deserialize.parser("vertices", float_matrix)
@deserialize.parser("edges", edge_rows)
@deserialize.parser("triangles", triangle_rows)
class MeshDocument:
    """A triangulation as stored on disk.

    The required keys are epsilon, vertices as [x, y], edges as [i, j, axis] with axis one of
    "a", "b", "c", and triangles as [i, j, k, orient] where orient is the sign of the chart area
    (q - p) ∧ (r - q). The frame, origin and lattice coordinates are optional; without them the
    frame is equilateral and the first vertex is the lattice origin.
    """

    class Constants:
        """Document constants."""

        SCHEMA_VERSION: ClassVar[int] = 1
        LATTICE_TOLERANCE: ClassVar[float] = 1e-6

    schema_version: int | None
    epsilon: float
    vertices: list[list[float]]
    edges: list[list[int]]
    triangles: list[list[int]]
    a: list[float] | None
    b: list[float] | None
    origin: list[float] | None
    lattice: list[list[int]] | None

    def __str__(self) -> str:
        return f"MeshDocument<eps={self.epsilon}: {len(self.vertices)} vertices>"

    def __repr__(self) -> str:
        return str(self)

    @staticmethod
    def from_json_data(data: Any) -> "MeshDocument":
        """Decode a parsed JSON document.

        Raises:
            MeshException: If the data does not have the document layout
        """
        try:
            return deserialize.deserialize(MeshDocument, data, throw_on_unhandled=True)
        except (deserialize.DeserializeException, ValueError) as ex:
            raise MeshException(f"Invalid mesh document: {ex}") from ex

    @staticmethod
    def from_triangulation(tri: Triangulation) -> "MeshDocument":
        document = MeshDocument()
        document.schema_version = MeshDocument.Constants.SCHEMA_VERSION
        document.epsilon = float(tri.epsilon)
        document.vertices = tri.vertices.tolist()
        document.edges = [
            [int(p), int(q), int(axis)] for (p, q), axis in zip(tri.edges, tri.edge_axes)
        ]
        document.triangles = [
            [int(p), int(q), int(r), int(sign)] for (p, q, r), sign in zip(tri.triangles, tri.signs)
        ]
        document.a = [float(value) for value in tri.frame.a]
        document.b = [float(value) for value in tri.frame.b]
        document.origin = [float(value) for value in tri.origin]
        document.lattice = tri.lattice.tolist()
        return document

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "schema_version": self.schema_version,
            "epsilon": self.epsilon,
            "vertices": self.vertices,
            "edges": [[p, q, AXIS_NAMES[axis]] for p, q, axis in self.edges],
            "triangles": [[p, q, r, "+" if sign > 0 else "-"] for p, q, r, sign in self.triangles],
            "a": self.a,
            "b": self.b,
            "origin": self.origin,
            "lattice": self.lattice,
        }
        return {key: value for key, value in data.items() if value is not None}

    def _frame(self) -> LatticeFrame:
        if self.a is None and self.b is None:
            return LatticeFrame.hexagonal()
        if self.a is None or self.b is None:
            raise MeshException("The lattice frame needs both a and b")
        return LatticeFrame((self.a[0], self.a[1]), (self.b[0], self.b[1]))

    def _lattice(self, vertices: FloatArray, frame: LatticeFrame, origin: FloatArray) -> np.ndarray:
        if self.lattice is not None:
            lattice = np.array(self.lattice, dtype=np.int64).reshape(-1, 2)
            if len(lattice) != len(vertices):
                raise MeshException("Lattice coordinates do not match the vertices")
            return lattice
        coordinates = ((vertices - origin) / self.epsilon) @ np.linalg.inv(frame.matrix).T
        rounded = np.rint(coordinates)
        if np.any(np.abs(coordinates - rounded) > MeshDocument.Constants.LATTICE_TOLERANCE):
            raise MeshException("Vertices do not lie on the lattice of the frame")
        return rounded.astype(np.int64)

    def to_triangulation(self) -> Triangulation:
        """Rebuild the triangulation.

        Edges are turned to run along the positive axis and triangles are put in the stored
        vertex order of their lattice cell, whatever order the document lists them in.

        Raises:
            MeshException: If the document is inconsistent
        """
        version = self.schema_version
        if version is not None and version != MeshDocument.Constants.SCHEMA_VERSION:
            raise MeshException(f"Unsupported mesh schema version {self.schema_version}")
        if not self.epsilon > 0:
            raise MeshException(f"epsilon must be positive, got {self.epsilon}")

        vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(vertices) == 0:
            raise MeshException("The mesh has no vertices")
        edge_table = np.array(self.edges, dtype=np.int64).reshape(-1, 3)
        triangle_table = np.array(self.triangles, dtype=np.int64).reshape(-1, 4)
        for name, indices in (("triangles", triangle_table[:, :3]), ("edges", edge_table[:, :2])):
            if indices.size and (indices.min() < 0 or indices.max() >= len(vertices)):
                raise MeshException(f"{name} refer to missing vertices")

        frame = self._frame()
        origin = vertices[0] if self.origin is None else np.array(self.origin, dtype=float)
        lattice = self._lattice(vertices, frame, origin)

        edges = np.empty((len(edge_table), 2), dtype=np.int64)
        for index, (p, q, axis) in enumerate(edge_table.tolist()):
            step = tuple(int(value) for value in lattice[q] - lattice[p])
            if step == AXIS_STEPS[axis]:
                edges[index] = (p, q)
            elif step == tuple(-value for value in AXIS_STEPS[axis]):
                edges[index] = (q, p)
            else:
                raise MeshException(f"Edge {index} does not run along axis {AXIS_NAMES[axis]}")

        triangles = np.empty((len(triangle_table), 3), dtype=np.int64)
        orientations = np.empty(len(triangle_table), dtype=np.int64)
        for index, (p, q, r, tag) in enumerate(triangle_table.tolist()):
            corners = vertices[[p, q, r]]
            area = wedge(corners[1] - corners[0], corners[2] - corners[1])
            if np.sign(area) != tag:
                raise MeshException(f"Triangle {index} has an orientation tag against its area")
            triangles[index], orientations[index] = _canonical_triangle(index, (p, q, r), lattice)

        return Triangulation(
            epsilon=self.epsilon,
            frame=frame,
            origin=origin,
            vertices=vertices,
            lattice=lattice,
            edges=edges,
            edge_axes=edge_table[:, 2].copy(),
            triangles=triangles,
            orientations=orientations,
        )


def _canonical_triangle(
    index: int, corners: tuple[int, int, int], lattice: np.ndarray
) -> tuple[list[int], int]:
    positions = {tuple(int(value) for value in lattice[vertex]): vertex for vertex in corners}
    low = (min(i for i, _ in positions), min(j for _, j in positions))
    offsets = {(i - low[0], j - low[1]) for i, j in positions}
    for orientation, cell in _CELL_CORNERS.items():
        if offsets == set(cell):
            order = [positions[(low[0] + di, low[1] + dj)] for di, dj in cell]
            return order, orientation
    raise MeshException(f"Triangle {index} is not a lattice triangle")


def save_mesh(tri: Triangulation, path: str | os.PathLike[str]) -> None:
    """Write a triangulation as a UTF-8 JSON document."""
    with open(path, "w", encoding="utf-8", newline="\n") as mesh_file:
        json.dump(MeshDocument.from_triangulation(tri).to_json(), mesh_file)
        mesh_file.write("\n")
    Log.debug(f"Wrote {tri} to {path}")


def load_mesh(path: str | os.PathLike[str]) -> Triangulation:
    """Read a triangulation document.

    Raises:
        MeshException: If the file is not a valid mesh document
    """
    try:
        with open(path, encoding="utf-8") as mesh_file:
            data = json.load(mesh_file)
    except (OSError, json.JSONDecodeError) as ex:
        raise MeshException(f"Could not read mesh {path}: {ex}") from ex

    document = MeshDocument.from_json_data(data)
    try:
        return document.to_triangulation()
    except ValueError as ex:
        raise MeshException(f"Invalid mesh document {path}: {ex}") from ex
