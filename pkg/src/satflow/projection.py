"""Correction velocity ``w = -grad p`` restoring saturation.

The pressure solves ``Laplacian(p) = div_h(A^up(U, rho))`` where the
right-hand side is the divergence of the *upwinded* desired flux, and ``w``
is the two-point face gradient of ``-p``.  With this pairing the scheme for
``mu = 1 - rho`` reduces to upwind transport of ``mu`` by ``w`` alone.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .grid import FaceField, Grid
from .poisson import DEFAULT_TOL, BCSpec, LinearSystem, assemble_laplacian, solve_pressure
from .transport import flux_divergence, upwind_face_flux


def divergence_upwind(rho: np.ndarray, V: FaceField, g: Grid) -> np.ndarray:
    """``div_h`` of the upwind flux of ``rho`` carried by ``V``."""
    return flux_divergence(upwind_face_flux(rho, V, g), g)


def face_difference(phi: np.ndarray, g: Grid) -> FaceField:
    """``(phi_C - phi_W)/dx`` on x-faces and ``(phi_C - phi_S)/dy`` on y-faces.

    Closed faces (walls, solid interfaces) get 0.
    """
    phi = g.clean(phi)
    gx = np.zeros((g.ny, g.nx + 1))
    gx[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / g.dx
    if g.periodic_x:
        gx[:, 0] = gx[:, -1] = (phi[:, 0] - phi[:, -1]) / g.dx
    gy = np.zeros((g.ny + 1, g.nx))
    gy[1:-1, :] = (phi[1:, :] - phi[:-1, :]) / g.dy
    if g.periodic_y:
        gy[0, :] = gy[-1, :] = (phi[0, :] - phi[-1, :]) / g.dy
    return FaceField(np.where(g.xface_open, gx, 0.0), np.where(g.yface_open, gy, 0.0))


def _pressure_rhs(rhos: Sequence[np.ndarray], Us: Sequence[FaceField], g: Grid) -> np.ndarray:
    rhs = g.zeros()
    for rho, U in zip(rhos, Us):
        rhs += divergence_upwind(rho, U, g)
    return rhs


def correction_velocity(
    rho: np.ndarray,
    U: FaceField,
    g: Grid,
    bc: Optional[BCSpec] = None,
    tol: float = DEFAULT_TOL,
    *,
    system: Optional[LinearSystem] = None,
    method: str = "auto",
) -> tuple[FaceField, np.ndarray]:
    """Return ``(w, p)`` for a single active species.

    Pass a prebuilt ``system`` to reuse its factorisation across steps.
    Wall faces carry ``w = 0``: the Neumann datum ``dp/dn = rho U.n`` and the
    boundary flux cancel in the pressure equation, so the total flux through
    walls vanishes.
    """
    return correction_velocity_multi([rho], [U], g, bc, tol, system=system, method=method)


def correction_velocity_multi(
    rhos: Sequence[np.ndarray],
    Us: Sequence[FaceField],
    g: Grid,
    bc: Optional[BCSpec] = None,
    tol: float = DEFAULT_TOL,
    *,
    system: Optional[LinearSystem] = None,
    method: str = "auto",
) -> tuple[FaceField, np.ndarray]:
    """Shared correction for several species: ``Laplacian(p) = sum_i div_h(A^up(U_i, rho_i))``."""
    if system is None:
        system = assemble_laplacian(g, bc)
    rhs = _pressure_rhs(rhos, Us, g)
    p = solve_pressure(system, rhs, tol, method=method)
    w = -face_difference(p, g)
    return w, p
