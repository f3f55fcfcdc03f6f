"""Prolonged Lagrangians, variational equations and their Noether charges.

The subpackages map onto the workflow: :mod:`varnoether.model` parses the
system description language, :mod:`varnoether.prolongation` derives the
prolonged density and its equations, :mod:`varnoether.symmetry` checks
generators and builds charges, :mod:`varnoether.dynamics` integrates and
monitors them, and :mod:`varnoether.verify` bundles the property suite.
"""

from .model import Generator, InitialState, ModelError, SystemDef, parse_initial_state, parse_system
from .prolongation import (
    OdeSystem,
    assemble_ode,
    euler_lagrange,
    mass_matrix,
    prolong,
    variational_equations_direct,
    variational_equations_via_gamma,
)
from .symmetry import Charge, check_invariance, classical_charge, extended_charge

__version__ = "0.1.0"

__all__ = [
    "Charge",
    "Generator",
    "InitialState",
    "ModelError",
    "OdeSystem",
    "SystemDef",
    "assemble_ode",
    "check_invariance",
    "classical_charge",
    "euler_lagrange",
    "extended_charge",
    "mass_matrix",
    "parse_initial_state",
    "parse_system",
    "prolong",
    "variational_equations_direct",
    "variational_equations_via_gamma",
]
