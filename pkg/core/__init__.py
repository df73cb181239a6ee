"""FluctNet Core Module

Uses lazy imports so that light consumers (configuration checks, metadata
validation) do not pay for the numerical stack until they touch it.
"""

import logging
from importlib import import_module
from typing import Any

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    # Network
    "NetworkSpec",
    "SystemMatrices",
    "build_markovian",
    "build_quasi_markovian",
    "validate_structure",
    "default_beta",
    # Matrix kernels
    "expm",
    "solve_lyapunov",
    "controllability",
    "finite_time_covariance",
    "stable_invariant_subspace",
    # Riccati
    "hamiltonian_matrix",
    "maximal_solution",
    "gap",
    "riccati_residual",
    "w_matrix",
    "RiccatiFamily",
    # Cumulant generating function
    "CgfProfile",
    "SteadyState",
    "e_of_omega",
    "critical_kappa",
    "cgf_integral",
    "cgf_spectral",
    "cgf_derivative",
    "entropy_production_rate",
    "propagate_gaussian",
    "gaussian_relative_entropy",
    # Large deviations
    "FunctionalKind",
    "LdpResult",
    "functional_domain",
    "rate_function",
    "extended_rate",
    "symmetry_function",
    "check_condition_r",
    # Simulation
    "TrajectoryBatch",
    "exact_step",
    "accumulate_functionals",
    "empirical_cgf",
    "path_oracle_cgf",
]

_LAZY_IMPORTS = {
    "NetworkSpec": "core.network",
    "SystemMatrices": "core.network",
    "build_markovian": "core.network",
    "build_quasi_markovian": "core.network",
    "validate_structure": "core.network",
    "default_beta": "core.network",
    "expm": "core.matops",
    "solve_lyapunov": "core.matops",
    "controllability": "core.matops",
    "finite_time_covariance": "core.matops",
    "stable_invariant_subspace": "core.matops",
    "hamiltonian_matrix": "core.riccati",
    "maximal_solution": "core.riccati",
    "gap": "core.riccati",
    "riccati_residual": "core.riccati",
    "RiccatiFamily": "core.riccati",
    "w_matrix": "core.riccati",
    "CgfProfile": "core.cgf",
    "SteadyState": "core.cgf",
    "e_of_omega": "core.cgf",
    "critical_kappa": "core.cgf",
    "cgf_integral": "core.cgf",
    "cgf_spectral": "core.cgf",
    "cgf_derivative": "core.cgf",
    "entropy_production_rate": "core.cgf",
    "propagate_gaussian": "core.cgf",
    "gaussian_relative_entropy": "core.cgf",
    "FunctionalKind": "core.ldp",
    "LdpResult": "core.ldp",
    "functional_domain": "core.ldp",
    "rate_function": "core.ldp",
    "extended_rate": "core.ldp",
    "symmetry_function": "core.ldp",
    "check_condition_r": "core.ldp",
    "TrajectoryBatch": "core.simulation.simulate",
    "exact_step": "core.simulation.simulate",
    "accumulate_functionals": "core.simulation.simulate",
    "empirical_cgf": "core.simulation.simulate",
    "path_oracle_cgf": "core.simulation.oracle",
}


def __getattr__(name: str) -> Any:
    if name not in _LAZY_IMPORTS:
        raise AttributeError(f"module 'core' has no attribute '{name}'")

    module = import_module(_LAZY_IMPORTS[name])
    return getattr(module, name)
