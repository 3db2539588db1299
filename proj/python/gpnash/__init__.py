"""GP-surrogate search for Nash equilibria on discretized strategy grids."""

from gpnash._core import (
    GameProblem,
    GpModel,
    InvalidInputError,
    NumericalError,
    StrategyGrid,
    build_factorial_grid,
    fixed_point_solve,
    gamma_hat,
    initial_design,
    make_problem,
    mvn_cdf_at_zero,
    mvn_sample,
    nash_extract,
    prob_equilibrium,
    prob_equilibrium_all,
    problem_names,
    run,
)

__all__ = [
    "GameProblem",
    "GpModel",
    "InvalidInputError",
    "NumericalError",
    "StrategyGrid",
    "build_factorial_grid",
    "fixed_point_solve",
    "gamma_hat",
    "initial_design",
    "make_problem",
    "mvn_cdf_at_zero",
    "mvn_sample",
    "nash_extract",
    "prob_equilibrium",
    "prob_equilibrium_all",
    "problem_names",
    "run",
]
