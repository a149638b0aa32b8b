"""Configuration and document types."""

from .config import (
    BondLawSpec,
    ChartSpec,
    FrameSpec,
    InitialSpec,
    MeasureSpec,
    MetricSpec,
    OutputSpec,
    ProblemConfig,
    QwSpec,
    SolverSpec,
    VolumeLawSpec,
    default_config,
    load_config,
    parse_config,
)
from .mesh import MeshDocument, load_mesh, save_mesh
from .parsers import float_list, float_matrix, float_vector, optional_float

__all__ = [
    "BondLawSpec",
    "ChartSpec",
    "FrameSpec",
    "InitialSpec",
    "MeasureSpec",
    "MetricSpec",
    "OutputSpec",
    "ProblemConfig",
    "QwSpec",
    "SolverSpec",
    "VolumeLawSpec",
    "default_config",
    "load_config",
    "parse_config",
    "MeshDocument",
    "load_mesh",
    "save_mesh",
    "float_list",
    "float_matrix",
    "float_vector",
    "optional_float",
]
