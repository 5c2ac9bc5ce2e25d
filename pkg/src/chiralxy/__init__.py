"""Chiral domain walls in the frustrated XY model on the triangular lattice."""
from .lattice import LatticeIndex, Triangle, triangles_in, neighbors, discrete_boundary, half_slice, build_chain
from .spin import (GroundStateKind, SpinField, ground_state, energy_triangle, chirality_triangle,
                   energy_region, chirality_field, interface_diagnostics, l1_chirality_distance)
from .optimize import CellProblem, SolverConfig, assemble_cell, minimize, solve_cell, phi_estimate

__version__ = "0.1.0"

__all__ = [
    "LatticeIndex", "Triangle", "triangles_in", "neighbors", "discrete_boundary", "half_slice", "build_chain",
    "GroundStateKind", "SpinField", "ground_state", "energy_triangle", "chirality_triangle", "energy_region",
    "chirality_field", "interface_diagnostics", "l1_chirality_distance",
    "CellProblem", "SolverConfig", "assemble_cell", "minimize", "solve_cell", "phi_estimate",
]
