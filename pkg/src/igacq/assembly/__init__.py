"""Discrete boundary operators and per-frequency systems."""

from .collocation import STATIC_S, CollocationAssembler, PointSet, near_pairs
from .galerkin import KINDS, GalerkinAssembler, Request
from .quaddata import ElementQuadrature, element_quadrature, space_quadrature
from .systems import (
    INDIRECT,
    PIVOT_TOL,
    BoundaryOperatorMatrix,
    FrequencySolveResult,
    IndirectProblem,
    MixedProblem,
    MixedSplit,
    NearBoundaryError,
    Projector,
    SingularSystemError,
    UnsupportedOperatorError,
    assemble_free_term,
    assemble_mass_and_rhs,
    assemble_operator,
    evaluate_interior,
    load_vector,
    mass_matrix,
    solve_frequency,
)

__all__ = [
    "INDIRECT", "KINDS", "PIVOT_TOL", "STATIC_S",
    "BoundaryOperatorMatrix", "CollocationAssembler", "ElementQuadrature", "FrequencySolveResult",
    "GalerkinAssembler", "IndirectProblem", "MixedProblem", "MixedSplit", "NearBoundaryError", "PointSet",
    "Projector", "Request", "SingularSystemError", "UnsupportedOperatorError",
    "assemble_free_term", "assemble_mass_and_rhs", "assemble_operator", "element_quadrature",
    "evaluate_interior", "load_vector", "mass_matrix", "near_pairs", "solve_frequency", "space_quadrature",
]
