"""Coupled damped wave and plate systems: energy decay under indirect damping."""

from .coupled_system import (
    CoupledSystem,
    DampingOperator,
    State,
    assemble,
    assemble_from_specs,
    check_hypotheses,
    generator_apply,
    generator_inverse,
    prepared_state,
    total_energy,
)
from .evolution import energy_trace, evolve_exact, evolve_midpoint
from .linalg_spectral import DiscreteHilbert, SelfAdjointOperator, eig_sym, frac_power
from .operators1d import catalog_spec, make_named, make_operator
from .presets import PRESETS, get_preset

__all__ = [
    "CoupledSystem",
    "DampingOperator",
    "DiscreteHilbert",
    "PRESETS",
    "SelfAdjointOperator",
    "State",
    "assemble",
    "assemble_from_specs",
    "catalog_spec",
    "check_hypotheses",
    "eig_sym",
    "energy_trace",
    "evolve_exact",
    "evolve_midpoint",
    "frac_power",
    "generator_apply",
    "generator_inverse",
    "get_preset",
    "make_named",
    "make_operator",
    "prepared_state",
    "total_energy",
]
