"""Proximal gradient methods for sparsity-promoting optimal control.

The package couples exact scalar proximal maps of nonconvex penalties with a
piecewise-linear finite element discretization of elliptic state equations on
the unit square, a proximal gradient loop with backtracking, stationarity
diagnostics, and a benchmark command line front end.
"""

from .diagnostics import StationarityReport, certify, gmap_sample, l_stationarity_residual, pmp_residual
from .errors import NumericError, ParameterError
from .mesh import (
    Mesh,
    build_mesh,
    control_l1,
    control_l2_sq,
    penalty_integral,
    support_change,
    support_measure,
)
from .pde import ReducedProblem, lipschitz_estimate, reduced_gradient, reduced_value, solve_adjoint, solve_state
from .penalties import (
    PenaltySpec,
    ProxResult,
    SparsityConstants,
    brute_force_prox,
    check_strong_conv_condition,
    compute_q0,
    compute_u0,
    compute_uI,
    prox_array,
    prox_integer,
    prox_l0,
    prox_log,
    prox_lp,
    prox_scalar,
    sparsity_constants,
)
from .solver import IterateRecord, PGResult, SolverConfig, omega_m_measure, omega_threshold, pg_step, run

__all__ = [
    "IterateRecord",
    "Mesh",
    "NumericError",
    "PGResult",
    "ParameterError",
    "PenaltySpec",
    "ProxResult",
    "ReducedProblem",
    "SolverConfig",
    "SparsityConstants",
    "StationarityReport",
    "brute_force_prox",
    "build_mesh",
    "certify",
    "check_strong_conv_condition",
    "compute_q0",
    "compute_u0",
    "compute_uI",
    "control_l1",
    "control_l2_sq",
    "gmap_sample",
    "l_stationarity_residual",
    "lipschitz_estimate",
    "omega_m_measure",
    "omega_threshold",
    "penalty_integral",
    "pg_step",
    "pmp_residual",
    "prox_array",
    "prox_integer",
    "prox_l0",
    "prox_log",
    "prox_lp",
    "prox_scalar",
    "reduced_gradient",
    "reduced_value",
    "run",
    "solve_adjoint",
    "solve_state",
    "sparsity_constants",
    "support_change",
    "support_measure",
]

__version__ = "0.1.0"
