"""Masked Cartesian grids on the unit square and the field containers used
throughout the package.

Array conventions
-----------------
* cell-centred fields ("scalar fields") are ``float`` arrays of shape
  ``(ny, nx)``; row ``j`` is the ``y`` index, column ``i`` the ``x`` index.
* x-normal faces are stored as an ``(ny, nx + 1)`` array: column ``i`` is the
  face ``x_{i-1/2}`` on the left of cell ``i``, column ``nx`` the right
  boundary.  y-normal faces are ``(ny + 1, nx)`` likewise.  On a periodic axis
  the first and last face columns are the same physical face and always hold
  the same value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GridError

WALL = "wall"
PERIODIC = "periodic"
SIDES = ("left", "right", "bottom", "top")


def _normalize_bc(bc, ny: int) -> dict[str, str]:
    if isinstance(bc, str):
        tags = dict.fromkeys(SIDES, bc)
    elif isinstance(bc, Mapping):
        tags = {}
        for key, val in bc.items():
            if key == "x":
                tags["left"] = tags["right"] = val
            elif key == "y":
                tags["bottom"] = tags["top"] = val
            elif key in SIDES:
                tags[key] = val
            else:
                raise GridError(f"unknown boundary side {key!r}")
        for side in SIDES:
            tags.setdefault(side, WALL)
    else:
        raise GridError(f"cannot interpret boundary tags {bc!r}")
    for side, val in tags.items():
        if val not in (WALL, PERIODIC):
            raise GridError(f"boundary tag for {side} must be 'wall' or 'periodic', got {val!r}")
    if (tags["left"] == PERIODIC) != (tags["right"] == PERIODIC):
        raise GridError("periodic tags must pair left with right")
    if (tags["bottom"] == PERIODIC) != (tags["top"] == PERIODIC):
        raise GridError("periodic tags must pair bottom with top")
    if ny == 1:
        # a single row has no y-coupling to speak of
        tags["bottom"] = tags["top"] = WALL
    return tags


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell grid on ``(0, 1)`` (1D, ``ny == 1``) or the unit square.

    ``solid`` flags obstacle cells; ``bc`` maps each side to ``"wall"`` or
    ``"periodic"``.  Instances are immutable.
    """

    nx: int
    ny: int
    solid: np.ndarray
    bc: Mapping[str, str]

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def is_1d(self) -> bool:
        return self.ny == 1

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def h(self) -> float:
        return min(self.dx, self.dy)

    @property
    def periodic_x(self) -> bool:
        return self.bc["left"] == PERIODIC

    @property
    def periodic_y(self) -> bool:
        return self.bc["bottom"] == PERIODIC

    @property
    def all_periodic(self) -> bool:
        return self.periodic_x and (self.periodic_y or self.is_1d)

    @cached_property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @cached_property
    def n_fluid(self) -> int:
        return int(self.fluid.sum())

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(ny, nx)`` arrays ``(X, Y)``."""
        x = (np.arange(self.nx) + 0.5) / self.nx
        y = (np.arange(self.ny) + 0.5) / self.ny
        return np.meshgrid(x, y)

    @cached_property
    def xface_open(self) -> np.ndarray:
        """Faces that can carry flux: both neighbours fluid, not a wall."""
        f = self.fluid
        out = np.zeros((self.ny, self.nx + 1), dtype=bool)
        out[:, 1:-1] = f[:, :-1] & f[:, 1:]
        if self.periodic_x:
            out[:, 0] = out[:, -1] = f[:, -1] & f[:, 0]
        out.flags.writeable = False
        return out

    @cached_property
    def yface_open(self) -> np.ndarray:
        f = self.fluid
        out = np.zeros((self.ny + 1, self.nx), dtype=bool)
        out[1:-1, :] = f[:-1, :] & f[1:, :]
        if self.periodic_y:
            out[0, :] = out[-1, :] = f[-1, :] & f[0, :]
        out.flags.writeable = False
        return out

    # index helpers -------------------------------------------------------

    def cell_index(self, i: int, j: int) -> int:
        """Flat (row-major) index of cell ``(i, j)``."""
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise IndexError((i, j))
        return j * self.nx + i

    def cell_ij(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.nx * self.ny:
            raise IndexError(k)
        j, i = divmod(k, self.nx)
        return i, j

    def face_index(self, i: int, j: int, axis: int) -> int:
        """Flat index of a face; x-faces first, then y-faces.

        ``axis=0`` is the x-face left of cell ``(i, j)`` (``i`` in ``0..nx``),
        ``axis=1`` the y-face below it (``j`` in ``0..ny``).
        """
        nxf = self.ny * (self.nx + 1)
        if axis == 0:
            if not (0 <= i <= self.nx and 0 <= j < self.ny):
                raise IndexError((i, j, axis))
            return j * (self.nx + 1) + i
        if axis == 1:
            if not (0 <= i < self.nx and 0 <= j <= self.ny):
                raise IndexError((i, j, axis))
            return nxf + j * self.nx + i
        raise ValueError("axis must be 0 or 1")

    def face_ijaxis(self, k: int) -> tuple[int, int, int]:
        nxf = self.ny * (self.nx + 1)
        if 0 <= k < nxf:
            j, i = divmod(k, self.nx + 1)
            return i, j, 0
        k -= nxf
        if 0 <= k < (self.ny + 1) * self.nx:
            j, i = divmod(k, self.nx)
            return i, j, 1
        raise IndexError(k)

    # field helpers -------------------------------------------------------

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def clean(self, field: np.ndarray) -> np.ndarray:
        """Copy of ``field`` with solid cells reported as 0."""
        out = np.array(field, dtype=float, copy=True).reshape(self.shape)
        out[self.solid] = 0.0
        return out

    def zero_faces(self) -> "FaceField":
        return FaceField(np.zeros((self.ny, self.nx + 1)), np.zeros((self.ny + 1, self.nx)))

    def fluid_components(self) -> int:
        """Number of connected components of the fluid region (face adjacency)."""
        n = self.nx * self.ny
        idx = np.arange(n).reshape(self.shape)
        rows, cols = [], []
        xo, yo = self.xface_open, self.yface_open
        # face i joins cells (i-1) % nx and i % nx
        jj, ii = np.nonzero(xo[:, 1:])
        rows.append(idx[jj, ii])
        cols.append(idx[jj, (ii + 1) % self.nx])
        jj, ii = np.nonzero(yo[1:, :])
        rows.append(idx[jj, ii])
        cols.append(idx[(jj + 1) % self.ny, ii])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        adj = coo_matrix((np.ones(r.size), (r, c)), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
        return int(np.unique(labels[self.fluid.ravel()]).size)


@dataclass
class FaceField:
    """Face-normal velocity components on a staggered grid.

    ``x`` has shape ``(ny, nx + 1)`` and ``y`` has shape ``(ny + 1, nx)``.
    On a periodic axis the first and last faces are one face and must hold
    the same value.
    """

    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "FaceField":
        return FaceField(self.x.copy(), self.y.copy())

    def __add__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "FaceField") -> "FaceField":
        return FaceField(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "FaceField":
        return FaceField(-self.x, -self.y)

    def __mul__(self, a: float) -> "FaceField":
        return FaceField(a * self.x, a * self.y)

    __rmul__ = __mul__

    def max_abs(self) -> tuple[float, float]:
        """Largest face speed along each axis."""
        return float(np.max(np.abs(self.x), initial=0.0)), float(np.max(np.abs(self.y), initial=0.0))

    def norm_inf(self) -> float:
        """Sum of the per-axis maximum face speeds (the CFL norm)."""
        return sum(self.max_abs())

    def masked(self, g: Grid) -> "FaceField":
        """Zero every face that cannot carry flux on ``g``."""
        return FaceField(np.where(g.xface_open, self.x, 0.0), np.where(g.yface_open, self.y, 0.0))


def build_grid(
    nx: int,
    ny: int = 1,
    mask_spec: Iterable[Sequence[float]] = (),
    bc="wall",
) -> Grid:
    """Build a grid, marking cells whose centres fall in any mask rectangle as solid.

    Rectangles are ``(x0, x1, y0, y1)`` in unit-square coordinates, treated
    as half-open ``[x0, x1) x [y0, y1)`` so that centres lying exactly on a
    shared edge are assigned to one side only.

    Raises
    ------
    GridError
        bad counts, rectangles outside the unit square, or a fluid region
        that is empty or split into several components.
    """
    nx, ny = int(nx), int(ny)
    if nx < 3 or ny < 1:
        raise GridError(f"need nx >= 3 and ny >= 1, got nx={nx}, ny={ny}")
    tags = _normalize_bc(bc, ny)
    solid = np.zeros((ny, nx), dtype=bool)
    x = (np.arange(nx) + 0.5) / nx
    y = (np.arange(ny) + 0.5) / ny
    X, Y = np.meshgrid(x, y)
    for rect in mask_spec:
        if len(rect) != 4:
            raise GridError(f"mask rectangle needs 4 numbers (x0, x1, y0, y1), got {rect!r}")
        x0, x1, y0, y1 = map(float, rect)
        if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
            raise GridError(f"mask rectangle {rect!r} not inside the unit square")
        solid |= (X >= x0) & (X < x1) & (Y >= y0) & (Y < y1)
    solid.flags.writeable = False
    g = Grid(nx, ny, solid, tags)
    if g.n_fluid == 0:
        raise GridError("mask covers every cell; fluid region is empty")
    if g.n_fluid == 1:
        raise GridError("a single fluid cell has no fluid neighbour")
    ncomp = g.fluid_components()
    if ncomp != 1:
        raise GridError(f"mask splits the fluid region into {ncomp} disconnected components")
    return g


def total_mass(rho: np.ndarray, g: Grid) -> float:
    """Integral of ``rho`` over fluid cells."""
    rho = np.asarray(rho, dtype=float).reshape(g.shape)
    return float(np.sum(rho[g.fluid]) * g.cell_volume)
