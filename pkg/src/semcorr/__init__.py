"""Semantic dense shape correspondence from multi-view features and region graphs."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimators import CorrespondenceModel, FeatureLifter, SemanticFuser, ShapeBundle
from .mesh import TriangleMesh, load_mesh, normalize_unit_sphere, read_mesh
from .spectral import SpectralBasis, compute_basis

__all__ = ["CorrespondenceModel", "FeatureLifter", "SemanticFuser", "ShapeBundle",
           "SpectralBasis", "TriangleMesh", "compute_basis", "load_mesh",
           "normalize_unit_sphere", "read_mesh"]
