"""Finite-volume solver for saturated two-species transport with a pressure projection."""

from .config import ScenarioConfig
from .errors import (
    CFLViolation,
    ConfigError,
    ConstraintDrift,
    GridError,
    IncompatibleRHS,
    MassMismatch,
    NoConvergence,
    NumericalError,
    SimulationError,
    ZeroMass,
    ZeroVelocityNoCap,
)
from .grid import FaceField, Grid, build_grid, total_mass
from .sim import Trajectory, bernoulli_init, run, run_two_species

__version__ = "0.1.0"
