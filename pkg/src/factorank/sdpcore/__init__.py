"""Semidefinite programming core: data model, solver, SDPA interchange, analysis."""
from .analysis import DEFAULT_RANK_TOL, FlatnessReport, extract_moment_matrix, flatness, numeric_rank
from .problem import (
    EQ,
    GEQ,
    INFEASIBLE,
    MAX_ITER,
    OPTIMAL,
    UNBOUNDED,
    AffineBlock,
    IllFormed,
    LinearRow,
    NotSolved,
    SDPProblem,
    SDPSolution,
)
from .sdpa import export_sdpa, read_sdpa
from .solver import SolverOptions, solve

__all__ = [
    "AffineBlock",
    "LinearRow",
    "SDPProblem",
    "SDPSolution",
    "SolverOptions",
    "FlatnessReport",
    "IllFormed",
    "NotSolved",
    "solve",
    "export_sdpa",
    "read_sdpa",
    "extract_moment_matrix",
    "flatness",
    "numeric_rank",
    "DEFAULT_RANK_TOL",
    "EQ",
    "GEQ",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "MAX_ITER",
]
