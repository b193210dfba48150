"""
Layered Kac-Ising phase diagram engine

Computes the Lebowitz-Penrose phase diagram of a two-dimensional Ising model
with a long-range Kac interaction along the horizontal axis and a weak
nearest-neighbour coupling lambda along the vertical axis, together with the
cluster expansion, the effective Hamiltonian on layer magnetizations and a
Metropolis cross-check.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    InvalidInputError,
    KacIsingError,
    SizeError,
)
from .config import DEFAULT_CONFIG, SolverConfig, load_run_config
from .ising1d import Coupling, FieldVector, make_reference, pressure, field_of_magnetization
from .phase import PhasePoint, convex_envelope, lp_pressure, mean_field_solve, spontaneous_magnetization
from .polymer import CoeffMap, cluster_coefficients, kp_check, max_lambda_kp, z_star_enumerate
from .monomial import MultiIndex, decompose
from .effective import eff_energy, ensemble_gap, minimize_eff, theta, u_from_m
from .mc import ModelParams, build_kernel, gamma_sweep, run_metropolis
from .runner import ExperimentRunner

__all__ = [
    'KacIsingError',
    'InvalidInputError',
    'DomainError',
    'SizeError',
    'ConvergenceError',
    'ConfigError',
    'SolverConfig',
    'DEFAULT_CONFIG',
    'load_run_config',
    'Coupling',
    'FieldVector',
    'make_reference',
    'pressure',
    'field_of_magnetization',
    'PhasePoint',
    'lp_pressure',
    'convex_envelope',
    'spontaneous_magnetization',
    'mean_field_solve',
    'CoeffMap',
    'z_star_enumerate',
    'kp_check',
    'max_lambda_kp',
    'cluster_coefficients',
    'MultiIndex',
    'decompose',
    'u_from_m',
    'eff_energy',
    'minimize_eff',
    'theta',
    'ensemble_gap',
    'ModelParams',
    'build_kernel',
    'run_metropolis',
    'gamma_sweep',
    'ExperimentRunner',
]
