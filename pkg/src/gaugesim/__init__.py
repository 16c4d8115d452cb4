"""Classical simulation of Trotterized Z2 lattice gauge theory circuits.

Submodules: ``lattice`` (geometry, Hamiltonians, gauge sectors),
``statevector`` (kernels), ``circuits`` (native-gate compilation), ``exact``
(Krylov reference dynamics), ``noise``, ``measure`` (observables and
postselection) and ``harness`` (presets, configs, CLI back end).
"""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, InsufficientStatistics, ResourceCapError
from .lattice import (
    GaugeSector,
    LatticeSpec,
    ModelParams,
    ProductState,
    build_initial_state,
    check_compliance,
    gauge_sector_of,
    pauli_term_list,
)
from .shots import ShotTable
from .statevector import StateVector
from .circuits import Circuit, NativeGate, build_experiment_circuit, build_trotter_step, synthesize_ujk
from .exact import build_hamiltonian, evolve_exact, trotter_error_study
from .noise import NoiseParams, apply_cphase_noise, apply_readout_noise
from .measure import (
    ObservableSeries,
    electric_field_average,
    eta_u1,
    eta_z2,
    gauss_z2_per_shot,
    postselect,
    site_resolved,
)

__all__ = [
    "Circuit", "ConfigError", "ConvergenceError", "GaugeSector", "InsufficientStatistics",
    "LatticeSpec", "ModelParams", "NativeGate", "NoiseParams", "ObservableSeries",
    "ProductState", "ResourceCapError", "ShotTable", "StateVector", "apply_cphase_noise",
    "apply_readout_noise", "build_experiment_circuit", "build_hamiltonian",
    "build_initial_state", "build_trotter_step", "check_compliance", "electric_field_average",
    "eta_u1", "eta_z2", "evolve_exact", "gauge_sector_of", "gauss_z2_per_shot",
    "pauli_term_list", "postselect", "site_resolved", "synthesize_ujk", "trotter_error_study",
]
