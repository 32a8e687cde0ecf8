"""Variational time stepping for the wave equation with a free boundary.

P1 finite elements in one and two dimensions, an energy-conserving
Crank-Nicolson type minimizing-movement scheme next to the classical
discrete Morse flow, an obstacle cutoff, a smoothed adhesion term and
volume-constrained droplets.
"""
from .config import ConfigError, RunConfig, build_config
from .constraints import (
    ConstraintSpec,
    Droplet,
    ProjectionError,
    constrained_advance,
    detect_merge,
    project_volume_nonneg,
)
from .driver import RunResult, run, simulate, sweep
from .energy import EnergyRecord, energy_ek, energy_numeric, free_boundary_set, fb_residual
from .mesh import (
    Mesh1D,
    Mesh2D,
    MeshError,
    assemble_mass,
    assemble_stiffness,
    build_uniform_interval,
    build_uniform_triangulation,
)
from .scenarios import SCENARIOS
from .scheme import (
    ConvergenceError,
    Operators,
    SchemeConfig,
    SchemeVariant,
    StepState,
    advance,
    cn_step_linear,
    dmf_step_linear,
    evaluate_I,
    gradient_I,
    initialize,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstraintSpec",
    "ConvergenceError",
    "Droplet",
    "EnergyRecord",
    "Mesh1D",
    "Mesh2D",
    "MeshError",
    "Operators",
    "ProjectionError",
    "RunConfig",
    "RunResult",
    "SCENARIOS",
    "SchemeConfig",
    "SchemeVariant",
    "StepState",
    "advance",
    "assemble_mass",
    "assemble_stiffness",
    "build_config",
    "build_uniform_interval",
    "build_uniform_triangulation",
    "cn_step_linear",
    "constrained_advance",
    "detect_merge",
    "dmf_step_linear",
    "energy_ek",
    "energy_numeric",
    "evaluate_I",
    "fb_residual",
    "free_boundary_set",
    "gradient_I",
    "initialize",
    "project_volume_nonneg",
    "run",
    "simulate",
    "sweep",
]
