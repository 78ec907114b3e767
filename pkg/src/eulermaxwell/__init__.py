"""Damped Euler-Maxwell flows near an expanding Burgers background.

Modules:

* :mod:`~eulermaxwell.grid` periodic spectral grids, fields and norms
* :mod:`~eulermaxwell.makino` parameters, Makino variables and initial data
* :mod:`~eulermaxwell.burgers` Burgers characteristics and background estimates
* :mod:`~eulermaxwell.maxwell` damped free Maxwell stepping
* :mod:`~eulermaxwell.solver` full and perturbation solvers with diagnostics
* :mod:`~eulermaxwell.decay` exponents, fits, envelopes and validity windows
* :mod:`~eulermaxwell.scenarios` and :mod:`~eulermaxwell.cli` the scenario runner
"""

from .grid import GridSpec, ScalarField, VectorField, sobolev_seminorm, xdot_sigma, x_sigma
from .makino import SimParams, FluidEMState, SymmetrizedState, generate_family, prepare_data, symmetrize, desymmetrize
from .burgers import InitialVelocity, FlowEval, estimate_suite
from .maxwell import FreeEMState, step_maxwell_free, run_maxwell_free, exact_plane_wave
from .solver import (FullSystem, PerturbationSystem, SchemeConfig, run_simulation, pack_full,
                     pack_perturbation, unpack, energy_identity_residual)
from .decay import c_gamma, theoretical_exponent, fit_exponent, bound_check, gamma_s_validity

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "ScalarField", "VectorField", "sobolev_seminorm", "xdot_sigma", "x_sigma",
    "SimParams", "FluidEMState", "SymmetrizedState", "generate_family", "prepare_data", "symmetrize",
    "desymmetrize", "InitialVelocity", "FlowEval", "estimate_suite", "FreeEMState", "step_maxwell_free",
    "run_maxwell_free", "exact_plane_wave", "FullSystem", "PerturbationSystem", "SchemeConfig",
    "run_simulation", "pack_full", "pack_perturbation", "unpack", "energy_identity_residual", "c_gamma",
    "theoretical_exponent", "fit_exponent", "bound_check", "gamma_s_validity",
]
