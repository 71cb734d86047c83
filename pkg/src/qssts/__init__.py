"""Reconstruction of an interior inclusion boundary from Cauchy data on an outer circle."""
from .descent import DescentConfig, run_inversion
from .errors import QsstsError
from .mesh import BoundaryTrace, Marker, Mesh, build_annulus_mesh, extract_boundary_trace
from .objective import KernelMode

__all__ = [
    "BoundaryTrace", "DescentConfig", "KernelMode", "Marker", "Mesh", "QsstsError",
    "build_annulus_mesh", "extract_boundary_trace", "run_inversion",
]
__version__ = "0.1.0"
