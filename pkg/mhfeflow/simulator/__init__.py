"""Fully implicit time stepping: scenarios, Newton iteration, step control and diagnostics."""

from mhfeflow.simulator.driver import RunResult, StepFailure, timestep_driver
from mhfeflow.simulator.metrics import cell_cfl, cfl_report, water_balance
from mhfeflow.simulator.newton import (
    IterationMetrics,
    NewtonResult,
    appleyard_chop,
    convergence_check,
    newton_solve,
)
from mhfeflow.simulator.scenario import (
    Scenario,
    build_five_spot,
    five_spot_wells,
    rock_from_config,
    scenario_from_config,
)

__all__ = [
    "IterationMetrics",
    "NewtonResult",
    "RunResult",
    "Scenario",
    "StepFailure",
    "appleyard_chop",
    "build_five_spot",
    "cell_cfl",
    "cfl_report",
    "convergence_check",
    "five_spot_wells",
    "newton_solve",
    "rock_from_config",
    "scenario_from_config",
    "timestep_driver",
    "water_balance",
]
