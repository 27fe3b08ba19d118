"""Vanishing viscosity for state-constraint Hamilton-Jacobi equations on an interval.

The viscous problem ``u + |u'|^p - f - eps u'' = 0`` with blow-up at the
endpoints is solved by a monotone finite-difference scheme, the
first-order state-constraint problem by an upwind scheme and, as an
independent check, by value iteration on the underlying control problem.
"""

from .core import (
    DataFunction,
    DomainGeometry,
    Exponents,
    GridFunction,
    ProblemSpec,
    c2_compact_bump,
    c2_zero_boundary_bump,
    constant_data,
    extended_distance,
    hat_bump,
    legendre_dual,
    make_exponents,
    sampled_data,
    zero_data,
)
from .barriers import ansatz_barrier, refined_supersolution, residual, verify_sign
from .elliptic import ViscousConfig, solve_blowup, solve_dirichlet
from .state_constraint import solve_dirichlet_first_order, solve_state_constraint
from .oracle import ControlDiscretization, trajectory_cost, value_iteration

__version__ = "0.1.0"

__all__ = [
    "DataFunction",
    "DomainGeometry",
    "Exponents",
    "GridFunction",
    "ProblemSpec",
    "c2_compact_bump",
    "c2_zero_boundary_bump",
    "constant_data",
    "extended_distance",
    "hat_bump",
    "legendre_dual",
    "make_exponents",
    "sampled_data",
    "zero_data",
    "ansatz_barrier",
    "refined_supersolution",
    "residual",
    "verify_sign",
    "ViscousConfig",
    "solve_blowup",
    "solve_dirichlet",
    "solve_dirichlet_first_order",
    "solve_state_constraint",
    "ControlDiscretization",
    "trajectory_cost",
    "value_iteration",
]
