"""Numerical laboratory for heat conduction with an unknown corroded boundary.

Forward solver for the heat equation with flux data on the accessible
boundary and a Robin condition on the unknown one, plus the experiments that
measure how well boundary temperatures determine that boundary.
"""
from .geometry import BoundaryProfile, DomainSpec, build_domain, hausdorff_distance, modified_distance
from .mesh import Mesh, generate_mesh, refine
from .solver import SolverConfig, TimeGrid, boundary_trace, solve_forward, trace_distance

__all__ = [
    "BoundaryProfile",
    "DomainSpec",
    "Mesh",
    "SolverConfig",
    "TimeGrid",
    "boundary_trace",
    "build_domain",
    "generate_mesh",
    "hausdorff_distance",
    "modified_distance",
    "refine",
    "solve_forward",
    "trace_distance",
]
