"""Streamline-diffusion finite elements on Shishkin triangular meshes."""

from .errors import (
    AssemblyError,
    ConfigurationError,
    GmresBreakdown,
    SdfemError,
    SingularMatrixError,
    UndefinedRateError,
    UnsupportedOperationError,
)
from .mesh import MeshParams, ShishkinMesh, build_macro_mesh, build_mesh
from .problem import ProblemSpec, get_problem, make_test_problem

__version__ = "0.1.0"

__all__ = [
    "AssemblyError", "ConfigurationError", "GmresBreakdown", "SdfemError",
    "SingularMatrixError", "UndefinedRateError", "UnsupportedOperationError",
    "MeshParams", "ShishkinMesh", "build_macro_mesh", "build_mesh",
    "ProblemSpec", "get_problem", "make_test_problem",
]
