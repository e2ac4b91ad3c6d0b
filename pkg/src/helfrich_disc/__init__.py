"""Discrete Helfrich-type curvature energies with Crouzeix-Raviart edge
directors on triangulated graph surfaces."""
from .directors import DirectorField, cr_interpolate, gauss_map, recovery_director
from .energy import continuous_energy, discrete_energy, fd_energy, willmore
from .mesh import build_triangulation, push_forward, refine_uniform, regularity, structured_mesh

__version__ = "0.1.0"

__all__ = [
    "DirectorField",
    "build_triangulation",
    "continuous_energy",
    "cr_interpolate",
    "discrete_energy",
    "fd_energy",
    "gauss_map",
    "push_forward",
    "recovery_director",
    "refine_uniform",
    "regularity",
    "structured_mesh",
    "willmore",
]
