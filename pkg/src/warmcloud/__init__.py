"""Finite-difference simulator for warm-cloud moisture transport in pressure coordinates."""

from .core import (FIELDS, BoundarySpec, ConfigError, FieldBC, Grid, GridConfig, MoistState, PhysParams,
                   build_grid, field_minmax)
from .solver import Model, RunResult, SimulationError, StepControl, rhs, run, simulate, stable_dt, step
from .velocity import AnalyticFlowSpec, AnalyticVelocity, VelocityField, analytic_velocity, validate_velocity

__version__ = "0.1.0"

__all__ = [
    "FIELDS", "BoundarySpec", "ConfigError", "FieldBC", "Grid", "GridConfig", "MoistState", "PhysParams",
    "build_grid", "field_minmax", "Model", "RunResult", "SimulationError", "StepControl", "rhs", "run",
    "simulate", "stable_dt", "step", "AnalyticFlowSpec", "AnalyticVelocity", "VelocityField",
    "analytic_velocity", "validate_velocity",
]
