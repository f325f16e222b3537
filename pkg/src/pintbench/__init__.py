"""Parallel-in-time integration toolkit.

A shifted Crank-Nicolson theta-scheme drives four model problems (scalar
decay, 1-d diffusion, 1-d transport, and a moving-boundary piston
surrogate); the Parareal engine composes coarse and fine propagators
over equal time windows with serial or pipelined scheduling; the CLI
reproduces convergence, failure-mode, and speedup experiments at desk
scale.
"""

__version__ = "0.1.0"

from .integrators import (
    NonDivisibleWindow,
    Propagator,
    SleepPropagator,
    ThetaPropagator,
    ThetaSettings,
    TimeStepError,
    convergence_order,
    make_propagator,
    theta_step,
)
from .linalg import (
    MaxItersExceeded,
    NewtonSettings,
    NumericBreakdown,
    Tridiagonal,
    axpy,
    dot,
    newton_solve,
    solve_tridiagonal,
)
from .parareal import (
    ErrorEntry,
    PararealConfig,
    PararealError,
    RunTrace,
    SpeedupModel,
    Task,
    boundary_error,
    parareal_update,
    pipelined_schedule,
    run_parareal,
    sequential_solve,
    theoretical_speedup,
    theta_weight,
)
from .problems import (
    Advection1DParams,
    AlePistonParams,
    DahlquistParams,
    GaussianBump,
    Heat1DParams,
    MeshDegenerate,
    ProblemSpec,
    SineMode,
    Zero,
    advection1d,
    ale_piston,
    dahlquist,
    forcing_s,
    heat1d,
    initial_state,
    reference_solution,
    rhs,
)
from .state import State

__all__ = [
    "__version__",
    "State",
    "NewtonSettings", "Tridiagonal", "axpy", "dot", "newton_solve", "solve_tridiagonal",
    "NumericBreakdown", "MaxItersExceeded",
    "ThetaSettings", "ThetaPropagator", "SleepPropagator", "Propagator",
    "theta_step", "make_propagator", "convergence_order",
    "NonDivisibleWindow", "TimeStepError",
    "ProblemSpec", "DahlquistParams", "Heat1DParams", "Advection1DParams", "AlePistonParams",
    "SineMode", "Zero", "GaussianBump", "MeshDegenerate",
    "dahlquist", "heat1d", "advection1d", "ale_piston",
    "forcing_s", "rhs", "initial_state", "reference_solution",
    "PararealConfig", "RunTrace", "SpeedupModel", "ErrorEntry", "Task", "PararealError",
    "run_parareal", "sequential_solve", "parareal_update", "theta_weight",
    "boundary_error", "theoretical_speedup", "pipelined_schedule",
]
