"""Desired velocity fields: constant, potential-driven, geodesic, chemotactic."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import ConfigError
from .grid import FaceField, Grid
from .poisson import DEFAULT_TOL, LinearSystem, solve_chemoattractant
from .projection import face_difference
from .transport import face_neighbours

CONSTANT = "constant_vector"
POTENTIAL = "explicit_potential"
GEODESIC = "geodesic_to_target"
CHEMOTAXIS = "chemotaxis"
KINDS = (CONSTANT, POTENTIAL, GEODESIC, CHEMOTAXIS)


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """How the desired velocity is obtained.

    ``data`` is a 2-vector for ``constant_vector``, a cell array ``D`` for
    ``explicit_potential`` (``U = -grad D``), a boolean target mask for
    ``geodesic_to_target`` and unused for ``chemotaxis``.
    """

    kind: str
    data: Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown velocity kind {self.kind!r}")


def face_gradient(phi: np.ndarray, g: Grid) -> FaceField:
    """Two-point face gradient of a cell field; closed faces are 0."""
    return face_difference(phi, g)


def _neighbours(g: Grid, i: int, j: int):
    """Fluid neighbours of (i, j) as (i, j, axis) triples."""
    nx, ny = g.nx, g.ny
    cand = []
    if i > 0:
        cand.append((i - 1, j, 0))
    elif g.periodic_x:
        cand.append((nx - 1, j, 0))
    if i < nx - 1:
        cand.append((i + 1, j, 0))
    elif g.periodic_x:
        cand.append((0, j, 0))
    if ny > 1:
        if j > 0:
            cand.append((i, j - 1, 1))
        elif g.periodic_y:
            cand.append((i, ny - 1, 1))
        if j < ny - 1:
            cand.append((i, j + 1, 1))
        elif g.periodic_y:
            cand.append((i, 0, 1))
    return [(a, b, ax) for a, b, ax in cand if not g.solid[b, a]]


def _eikonal_update(a: float, b: float, dx: float, dy: float) -> float:
    """Solve ``((T-a)/dx)^2 + ((T-b)/dy)^2 = 1`` upwind, with one-sided fallback."""
    if math.isinf(a) and math.isinf(b):
        return math.inf
    one_sided = min(a + dx, b + dy)
    if math.isinf(a) or math.isinf(b):
        return one_sided
    # two-sided solution is only valid when it exceeds both neighbours
    ia, ib = 1.0 / dx**2, 1.0 / dy**2
    qa = ia + ib
    qb = -2.0 * (a * ia + b * ib)
    qc = a * a * ia + b * b * ib - 1.0
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        return one_sided
    t = (-qb + math.sqrt(disc)) / (2.0 * qa)
    if t >= max(a, b):
        return min(t, one_sided)
    return one_sided


def fast_march_distance(g: Grid, target: np.ndarray) -> np.ndarray:
    """First-order fast-marching solution of ``|grad D| = 1``, ``D = 0`` on ``target``.

    Solid cells and fluid cells that are never reached are ``+inf``.
    """
    target = np.asarray(target, dtype=bool).reshape(g.shape)
    if not target.any():
        raise ConfigError("geodesic target mask is empty")
    if np.any(target & g.solid):
        raise ConfigError("geodesic target touches solid cells")
    dist = np.full(g.shape, np.inf)
    accepted = np.zeros(g.shape, dtype=bool)
    heap = []
    for j, i in zip(*np.nonzero(target)):
        dist[j, i] = 0.0
        heap.append((0.0, int(i), int(j)))
    heapq.heapify(heap)
    dx, dy = g.dx, g.dy
    while heap:
        d, i, j = heapq.heappop(heap)
        if accepted[j, i] or d > dist[j, i]:
            continue
        accepted[j, i] = True
        for a, b, _ in _neighbours(g, i, j):
            if accepted[b, a]:
                continue
            ax = ay = math.inf
            for c, e, axis in _neighbours(g, a, b):
                if accepted[e, c]:
                    if axis == 0:
                        ax = min(ax, dist[e, c])
                    else:
                        ay = min(ay, dist[e, c])
            t = _eikonal_update(ax, ay, dx, dy)
            if t < dist[b, a]:
                dist[b, a] = t
                heapq.heappush(heap, (t, a, b))
    dist[g.solid] = np.inf
    return dist


def right_wall_target(g: Grid) -> np.ndarray:
    """Fluid cells of the rightmost column."""
    t = np.zeros(g.shape, dtype=bool)
    t[:, -1] = g.fluid[:, -1]
    return t


def potential_velocity(D: np.ndarray, g: Grid) -> FaceField:
    """``U = -grad D`` on faces; faces touching an infinite value get 0."""
    D = np.asarray(D, dtype=float).reshape(g.shape)
    finite = np.isfinite(D) & g.fluid
    grad = face_gradient(np.where(finite, D, 0.0), g)
    xm, xp, ym, yp = face_neighbours(finite.astype(float), g)
    okx = (xm > 0) & (xp > 0)
    oky = (ym > 0) & (yp > 0)
    return FaceField(np.where(okx, -grad.x, 0.0), np.where(oky, -grad.y, 0.0))


def desired_velocity(
    spec: PotentialSpec,
    rho: Optional[np.ndarray],
    g: Grid,
    *,
    tol: float = DEFAULT_TOL,
    system: Optional[LinearSystem] = None,
) -> FaceField:
    """Face velocity for ``spec``.

    ``system`` is an optional periodic Laplacian reused by the chemotaxis
    solve.
    """
    if spec.kind == CONSTANT:
        vx, vy = (list(spec.data) + [0.0, 0.0])[:2]
        f = FaceField(np.full((g.ny, g.nx + 1), float(vx)), np.full((g.ny + 1, g.nx), float(vy)))
        return f.masked(g)
    if spec.kind == POTENTIAL:
        return potential_velocity(spec.data, g)
    if spec.kind == GEODESIC:
        return potential_velocity(fast_march_distance(g, spec.data), g)
    if not g.all_periodic:
        raise ConfigError("chemotaxis velocity needs a fully periodic grid")
    S = solve_chemoattractant(g, rho, tol, system=system)
    return face_gradient(S, g)
