"""Few-boson exact diagonalization and trap-quench dynamics in a finite optical lattice.

Units: energies in recoil energies E_R, lengths in 1/k, times in hbar/E_R.
The single-particle Hamiltonian is -d^2/dx^2 + v0 sin^2(x) + (omega_sq/4) x^2
with hard walls at +-S pi/2.
"""

__version__ = "0.1.0"

from .dvr import Grid, PotentialSpec, build_grid, single_particle_eigs
from .fock import FockBasis, NumberLabel, build_basis, format_label, parse_label
from .hamiltonian import RegionSpec
from .model import LatticeModel, ModelConfig
from .quench import QuenchProtocol, evolve, ground_state, population_timeseries, state_prep_search
from .spectrum import detect_crossings, scan_spectrum

__all__ = [
    "Grid",
    "PotentialSpec",
    "build_grid",
    "single_particle_eigs",
    "FockBasis",
    "NumberLabel",
    "build_basis",
    "format_label",
    "parse_label",
    "RegionSpec",
    "LatticeModel",
    "ModelConfig",
    "QuenchProtocol",
    "evolve",
    "ground_state",
    "population_timeseries",
    "state_prep_search",
    "scan_spectrum",
    "detect_crossings",
]
