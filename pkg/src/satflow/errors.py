"""Exception hierarchy.

Configuration problems derive from :class:`ConfigError`; everything raised
while stepping or solving derives from :class:`NumericalError`.  The CLI maps
the two families onto distinct exit codes.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid scenario, grid or boundary-condition description."""


class GridError(ConfigError):
    """Grid geometry violates an invariant (e.g. disconnected fluid region)."""


class NumericalError(RuntimeError):
    """Base class for failures of the numerical pipeline."""


class IncompatibleRHS(NumericalError):
    """Right-hand side of a singular (Neumann/periodic) problem has nonzero mean."""


class NoConvergence(NumericalError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message: str, **info):
        super().__init__(message)
        self.info = info


class CFLViolation(NumericalError):
    """Requested time step exceeds the stability bound."""


class ZeroVelocityNoCap(NumericalError):
    """Both velocity fields vanish and no time-step cap was supplied."""


class MassMismatch(NumericalError):
    """Two densities that must carry equal mass do not."""


class ZeroMass(NumericalError):
    """Operation needs a density with positive total mass."""


class SimulationError(NumericalError):
    """A module error raised inside the time loop, tagged with step and time."""

    def __init__(self, step: int, time: float, cause: Exception):
        super().__init__(f"step {step}, t={time:.6g}: {type(cause).__name__}: {cause}")
        self.step = step
        self.time = time
        self.cause = cause


class ConstraintDrift(UserWarning):
    """Two-species mode: rho1 + rho2 drifted away from 1."""
