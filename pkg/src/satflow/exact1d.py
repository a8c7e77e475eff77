"""Reference solutions for the 1D wall problem.

With a wall at ``x = 1`` the pressure gradient equals ``rho U`` everywhere,
so the active density obeys the scalar law ``d_t rho + d_x(U rho (1 - rho)) = 0``.
Entropy solutions are computed with a fine-grid Godunov scheme; monotone
schemes converge to the entropy solution, and refinement gives a
self-check of the reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PiecewiseConstant1D:
    """Piecewise-constant function on ``[0, 1]``.

    ``breakpoints`` are strictly increasing with ``0`` and ``1`` included;
    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k + 1])``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        if b.ndim != 1 or b.size != v.size + 1:
            raise ConfigError("need one value per interval")
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ConfigError("breakpoints must increase strictly from 0 to 1")
        if np.any(v < 0) or np.any(v > 1):
            raise ConfigError("values must lie in [0, 1]")

    @classmethod
    def from_indicators(cls, pieces: Sequence[tuple[float, float, float]]) -> "PiecewiseConstant1D":
        """Sum of ``value * 1_[a, b]`` terms, e.g. ``[(0.3, 0.5, 1.0)]``."""
        pts = sorted({0.0, 1.0, *(p[0] for p in pieces), *(p[1] for p in pieces)})
        pts = np.array(pts)
        mid = 0.5 * (pts[:-1] + pts[1:])
        vals = np.zeros(mid.size)
        for a, b, v in pieces:
            vals += np.where((mid > a) & (mid < b), v, 0.0)
        return cls(pts, vals)

    def __call__(self, x):
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.values.size - 1)
        return self.values[k]

    def mass(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))

    def cell_averages(self, n: int) -> np.ndarray:
        """Exact averages over ``n`` uniform cells."""
        edges = np.linspace(0.0, 1.0, n + 1)
        cum_b = np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.breakpoints))])
        cum = np.interp(edges, self.breakpoints, cum_b)
        return np.diff(cum) * n


def flux(rho, U: float = 1.0):
    """``f(rho) = U rho (1 - rho)``."""
    rho = np.asarray(rho, dtype=float)
    return U * rho * (1.0 - rho)


def godunov_flux(rho_l, rho_r, U: float = 1.0):
    """Exact Riemann-problem flux of ``f(rho) = U rho (1 - rho)``.

    ``min f`` over ``[rho_l, rho_r]`` when ``rho_l <= rho_r``, ``max f`` over
    ``[rho_r, rho_l]`` otherwise.  ``f`` is extremal at ``rho = 1/2``, so the
    extremum is either an endpoint or that point.
    """
    rl = np.asarray(rho_l, dtype=float)
    rr = np.asarray(rho_r, dtype=float)
    fl, fr = flux(rl, U), flux(rr, U)
    lo, hi = np.minimum(rl, rr), np.maximum(rl, rr)
    straddle = (lo <= 0.5) & (hi >= 0.5)
    fmid = flux(0.5, U)
    fmin = np.minimum(fl, fr)
    fmax = np.maximum(fl, fr)
    fmin = np.where(straddle, np.minimum(fmin, fmid), fmin)
    fmax = np.where(straddle, np.maximum(fmax, fmid), fmax)
    out = np.where(rl <= rr, fmin, fmax)
    return float(out) if out.ndim == 0 else out


def godunov_evolve(rho: np.ndarray, U: float, t: float, cfl: float = 0.4) -> np.ndarray:
    """Advance cell averages on a uniform grid of ``(0, 1)`` to time ``t``.

    Both ends are walls (zero numerical flux).
    """
    rho = np.array(rho, dtype=float)
    n = rho.size
    dx = 1.0 / n
    if t <= 0 or U == 0:
        return rho
    dt_max = cfl * dx / abs(U)  # max |f'(rho)| = |U| on [0, 1]
    nsteps = int(np.ceil(t / dt_max - 1e-12))
    dt = t / nsteps
    F = np.zeros(n + 1)
    for _ in range(nsteps):
        F[1:-1] = godunov_flux(rho[:-1], rho[1:], U)
        rho -= dt / dx * (F[1:] - F[:-1])
    return rho


def exact_entropy_solution(
    rho0: PiecewiseConstant1D,
    U: float,
    t: float,
    n_eval: int,
    refine: int = 16,
) -> PiecewiseConstant1D:
    """Entropy solution at time ``t`` as averages over ``n_eval`` uniform cells.

    Computed by the Godunov scheme on ``refine * n_eval`` cells (CFL 0.4).
    Values are clipped into ``[0, 1]`` to absorb round-off.
    """
    if t < 0:
        raise ConfigError("t must be nonnegative")
    if refine < 1:
        raise ConfigError("refine must be >= 1")
    fine = godunov_evolve(rho0.cell_averages(n_eval * refine), U, t)
    coarse = fine.reshape(n_eval, refine).mean(axis=1)
    return PiecewiseConstant1D(np.linspace(0.0, 1.0, n_eval + 1), np.clip(coarse, 0.0, 1.0))


def steady_state_1d(rho0: PiecewiseConstant1D) -> PiecewiseConstant1D:
    """Saturated block ``1_[1 - M, 1]`` against the right wall (``U > 0``)."""
    m = rho0.mass()
    if m <= 0.0:
        return PiecewiseConstant1D([0.0, 1.0], [0.0])
    if m >= 1.0:
        return PiecewiseConstant1D([0.0, 1.0], [1.0])
    return PiecewiseConstant1D([0.0, 1.0 - m, 1.0], [0.0, 1.0])


def rankine_hugoniot_speed(rho_l: float, rho_r: float, U: float = 1.0) -> float:
    """Shock speed ``[f]/[rho]``."""
    if rho_l == rho_r:
        return float(U * (1.0 - 2.0 * rho_l))
    return float((flux(rho_r, U) - flux(rho_l, U)) / (rho_r - rho_l))


def l1_distance(a: np.ndarray, b: np.ndarray) -> float:
    """L1 distance of two uniform cell-average arrays on ``(0, 1)``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(np.sum(np.abs(a - b)) / a.size)
