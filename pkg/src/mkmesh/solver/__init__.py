"""Global operators, eigen-analysis, Poisson and time-dependent solvers."""
from .operators import GlobalOperator, assemble, spectrum
from .oracles import (
    ad_exact_case1,
    ad_exact_case2,
    burgers_exact,
    l2_norm,
    ratio_R,
    test_function,
)
from .pde import ErrorReport, PDEConfig, run_advection_diffusion, run_burgers, run_poisson_disc, run_poisson_periodic
from .poisson import IterativeFailure, poisson_solve
from .timestepping import (
    DivergenceError,
    advection_diffusion_rhs,
    burgers_rhs,
    rk4_advance,
    timestep,
)

__all__ = [
    "GlobalOperator",
    "assemble",
    "spectrum",
    "ad_exact_case1",
    "ad_exact_case2",
    "burgers_exact",
    "l2_norm",
    "ratio_R",
    "test_function",
    "ErrorReport",
    "PDEConfig",
    "run_advection_diffusion",
    "run_burgers",
    "run_poisson_disc",
    "run_poisson_periodic",
    "IterativeFailure",
    "poisson_solve",
    "DivergenceError",
    "advection_diffusion_rhs",
    "burgers_rhs",
    "rk4_advance",
    "timestep",
]
