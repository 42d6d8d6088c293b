"""Randomized iterative solvers for consistent linear systems."""

from ._ashbm import (
    AshbmError,
    System,
    build_partition,
    convergence_factor,
    generate_gaussian_problem,
    load_matrix_market,
    min_norm_solution,
    rse,
    run_experiment,
    solve,
    spectral_quantities,
    theoretical_bound,
)

__all__ = [
    "AshbmError",
    "System",
    "build_partition",
    "convergence_factor",
    "generate_gaussian_problem",
    "load_matrix_market",
    "min_norm_solution",
    "rse",
    "run_experiment",
    "solve",
    "spectral_quantities",
    "theoretical_bound",
]
