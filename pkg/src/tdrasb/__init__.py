"""Restricted-active-space self-consistent-field dynamics for trapped bosons."""

from .dvr import Grid, Interaction, Model, Trap, build_grid
from .eom import EquationsOfMotion, State, state_derivative
from .fock import FockSpace, RasSpec, Scheme, dim_fci, dim_ras
from .observables import breathing_frequency, energy, natural_occupations
from .propagator import IntegratorSpec, Protocol, initial_guess, propagate, relax, run_protocol

__all__ = [
    "EquationsOfMotion", "FockSpace", "Grid", "IntegratorSpec", "Interaction", "Model", "Protocol",
    "RasSpec", "Scheme", "State", "Trap", "breathing_frequency", "build_grid", "dim_fci", "dim_ras",
    "energy", "initial_guess", "natural_occupations", "propagate", "relax", "run_protocol",
    "state_derivative",
]
