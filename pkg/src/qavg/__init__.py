"""Exact and phase-estimation-reconstructed Green's functions for impurity models and DMFT."""
from .config import ConfigError, RunConfig
from .dmft import DmftConfig, FciSolver, NonConvergence, QavgSolver, run_dmft
from .eigen import diagonalize, select_initial_states
from .engine import CostConfig, MetropolisSchedule, QavgProblem, SearchRanges, optimize
from .fock import FockBasis
from .greens import lehmann_gf, matsubara_gf, thermal_spectrum
from .hamiltonian import Kanamori, SecondQuantizedHamiltonian, build_aim, hubbard_atom
from .lattice import BetheLattice, LatticeHamiltonian
from .qpe import QpeSetting, estimate_gamma, exact_histograms, shifted_settings

__version__ = "0.1.0"

__all__ = [
    "BetheLattice", "ConfigError", "CostConfig", "DmftConfig", "FciSolver", "FockBasis", "Kanamori",
    "LatticeHamiltonian", "MetropolisSchedule", "NonConvergence", "QavgProblem", "QavgSolver", "QpeSetting",
    "RunConfig", "SearchRanges", "SecondQuantizedHamiltonian", "build_aim", "diagonalize", "estimate_gamma",
    "exact_histograms", "hubbard_atom", "lehmann_gf", "matsubara_gf", "optimize", "run_dmft",
    "select_initial_states", "shifted_settings", "thermal_spectrum",
]
