"""Monte Carlo sampling, determinant oracles and analytic regressions."""

from .simulate import (
    CgfEstimate,
    CltSummary,
    JarzynskiSummary,
    TrajectoryBatch,
    accumulate_functionals,
    clt_check,
    empirical_cgf,
    exact_step,
    jarzynski_check,
    simulate_functionals,
    stochastic_integral_tde,
    trajectory_stream,
)
from .oracle import path_oracle_cgf, transfer_oracle_cgf
from .regression import RegressionRunner, RegressionScenario, ScenarioResult

__all__ = [
    "CgfEstimate",
    "CltSummary",
    "JarzynskiSummary",
    "TrajectoryBatch",
    "accumulate_functionals",
    "clt_check",
    "empirical_cgf",
    "exact_step",
    "jarzynski_check",
    "simulate_functionals",
    "stochastic_integral_tde",
    "trajectory_stream",
    "path_oracle_cgf",
    "transfer_oracle_cgf",
    "RegressionRunner",
    "RegressionScenario",
    "ScenarioResult",
]
