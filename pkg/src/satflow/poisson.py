"""Five-point Laplacian on masked grids and its linear solvers.

The operator is assembled on fluid cells only.  Faces that cannot carry flux
(walls, fluid/solid interfaces) contribute nothing, which is a homogeneous
Neumann condition; prescribed Neumann data enters through the right-hand
side.  Periodic sides wrap around.  The 1D wall problem can pin ``p = 0`` at
``x = 0`` through a reflected ghost value.

Pure Neumann and periodic problems have the constants as nullspace; their
right-hand sides must have zero mean and the reported solution is the
zero-mean representative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, IncompatibleRHS, NoConvergence
from .grid import FaceField, Grid

DIRICHLET_LEFT_1D = "dirichlet_left_neumann_right_1d"
NEUMANN = "neumann_all_walls"
PERIODIC = "periodic"
BC_KINDS = (DIRICHLET_LEFT_1D, NEUMANN, PERIODIC)

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 400


@dataclass(frozen=True)
class BCSpec:
    """Boundary treatment of the pressure / potential problem.

    ``neumann`` handles every wall side with a Neumann condition (periodic
    sides of a mixed grid still wrap).  ``neumann_data`` optionally prescribes
    the derivative along the positive axis direction on boundary faces; it
    uses the :class:`FaceField` layout and is ignored on interior faces.
    """

    kind: str = NEUMANN
    neumann_data: Optional[FaceField] = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ConfigError(f"unknown pressure boundary kind {self.kind!r}")


def default_bc(g: Grid, dirichlet_left: bool = False) -> BCSpec:
    if dirichlet_left:
        return BCSpec(DIRICHLET_LEFT_1D)
    if g.all_periodic:
        return BCSpec(PERIODIC)
    return BCSpec(NEUMANN)


@dataclass(eq=False)
class LinearSystem:
    """Sparse symmetric Laplacian restricted to the fluid cells of a grid."""

    grid: Grid
    bc: BCSpec
    matrix: sp.csr_matrix
    unknowns: np.ndarray  # flat cell indices of the fluid cells
    nullspace: str  # "none" or "constants"
    _factor: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.unknowns.size

    def gather(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float).reshape(-1)[self.unknowns]

    def scatter(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.nx * self.grid.ny)
        out[self.unknowns] = vec
        return out.reshape(self.grid.shape)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Discrete Laplacian of a cell field (solid cells read and written as 0)."""
        return self.scatter(self.matrix @ self.gather(values))

    def boundary_term(self) -> np.ndarray:
        """Contribution of the Neumann data to the Laplacian, per cell."""
        g = self.grid
        out = g.zeros()
        data = self.bc.neumann_data
        if data is None:
            return out
        if not g.periodic_x:
            out[:, 0] -= data.x[:, 0] / g.dx
            out[:, -1] += data.x[:, -1] / g.dx
        if not g.periodic_y and not g.is_1d:
            out[0, :] -= data.y[0, :] / g.dy
            out[-1, :] += data.y[-1, :] / g.dy
        out[g.solid] = 0.0
        return out


def assemble_laplacian(g: Grid, bc: Optional[BCSpec] = None) -> LinearSystem:
    """Assemble the five-point Laplacian ``(p_E - 2 p_C + p_W)/dx^2 + ...``."""
    bc = bc or default_bc(g)
    if bc.kind == PERIODIC and not g.all_periodic:
        raise ConfigError("periodic pressure conditions need a fully periodic grid")
    if bc.kind == DIRICHLET_LEFT_1D and (not g.is_1d or g.periodic_x):
        raise ConfigError("Dirichlet-left conditions are defined for 1D wall grids only")
    n_all = g.nx * g.ny
    idx = np.arange(n_all).reshape(g.shape)
    rows, cols, vals = [], [], []

    def couple(a, b, coef):
        rows.extend((a, b, a, b))
        cols.extend((b, a, a, b))
        vals.extend((np.full(a.size, coef),) * 2 + (np.full(a.size, -coef),) * 2)

    jj, ii = np.nonzero(g.xface_open[:, 1:])
    couple(idx[jj, ii], idx[jj, (ii + 1) % g.nx], 1.0 / g.dx**2)
    jj, ii = np.nonzero(g.yface_open[1:, :])
    couple(idx[jj, ii], idx[(jj + 1) % g.ny, ii], 1.0 / g.dy**2)
    nullspace = "constants"
    if bc.kind == DIRICHLET_LEFT_1D:
        # ghost value p_{-1} = -p_0 puts p = 0 on the face x = 0
        first = idx[:, 0][g.fluid[:, 0]]
        rows.append(first)
        cols.append(first)
        vals.append(np.full(first.size, -2.0 / g.dx**2))
        nullspace = "none"
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    v = np.concatenate(vals) if vals else np.zeros(0)
    full = sp.coo_matrix((v, (r, c)), shape=(n_all, n_all)).tocsr()
    unknowns = np.flatnonzero(g.fluid.ravel())
    mat = full[unknowns][:, unknowns].tocsr()
    mat.sum_duplicates()
    return LinearSystem(g, bc, mat, unknowns, nullspace)


def _check_compatible(system: LinearSystem, b: np.ndarray, scale: Optional[float] = None) -> np.ndarray:
    if system.nullspace != "constants":
        return b
    total = float(np.sum(b))
    scale = max(float(np.sum(np.abs(b))), scale or 0.0)
    if abs(total) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise IncompatibleRHS(
            f"right-hand side integrates to {total * system.grid.cell_volume:.3e}, "
            "not zero, on a problem with constant nullspace"
        )
    return b - total / b.size


def _dense_solve(system: LinearSystem, b: np.ndarray) -> np.ndarray:
    k = -system.matrix.toarray()
    if system.nullspace == "constants":
        k += 1.0 / b.size
    return np.linalg.solve(k, -b)


def _direct_solve(system: LinearSystem, b: np.ndarray) -> np.ndarray:
    k = -system.matrix
    if system._factor is None:
        if system.nullspace == "constants":
            # pin the first unknown; the dropped row is implied by zero-mean data
            system._factor = splu(k[1:, 1:].tocsc())
        else:
            system._factor = splu(k.tocsc())
    if system.nullspace == "constants":
        x = np.zeros(b.size)
        x[1:] = system._factor.solve(-b[1:])
        return x
    return system._factor.solve(-b)


def pcg(
    system: LinearSystem,
    b: np.ndarray,
    tol: float,
    x0: Optional[np.ndarray] = None,
    maxiter: Optional[int] = None,
) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned conjugate gradient for ``-A x = -b``.

    Stops once ``max|A x - b| <= tol``.  For a constant nullspace the iterates
    and residuals are kept at zero mean.
    """
    k = -system.matrix
    rhs = -b
    diag = k.diagonal()
    minv = 1.0 / diag
    singular = system.nullspace == "constants"
    x = np.zeros(b.size) if x0 is None else np.array(x0, dtype=float)
    if singular:
        x -= x.mean()
    r = rhs - k @ x
    if singular:
        r -= r.mean()
    maxiter = maxiter or max(1000, 10 * b.size)
    if np.max(np.abs(r), initial=0.0) <= tol:
        return x, 0
    z = minv * r
    if singular:
        z -= z.mean()
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        kd = k @ d
        dkd = d @ kd
        if not dkd > 0:
            break  # breakdown: the residual cannot be reduced further
        alpha = rz / dkd
        x += alpha * d
        r -= alpha * kd
        if singular:
            r -= r.mean()
        if np.max(np.abs(r)) <= tol:
            return x, it
        z = minv * r
        if singular:
            z -= z.mean()
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise NoConvergence(
        f"conjugate gradient did not reach {tol:.1e} in {it} iterations",
        residual=float(np.max(np.abs(r))),
        iterations=it,
    )


def solve_pressure(
    system: LinearSystem,
    rhs: np.ndarray,
    tol: float = DEFAULT_TOL,
    *,
    method: str = "auto",
    x0: Optional[np.ndarray] = None,
    scale: Optional[float] = None,
) -> np.ndarray:
    """Solve ``A p = rhs`` for the discrete Laplacian ``A`` of ``system``.

    ``method`` is ``"dense"``, ``"direct"`` (cached sparse LU), ``"cg"`` or
    ``"auto"`` (dense up to 400 unknowns, sparse LU above).  The residual is
    verified in the max norm against ``tol * max(1, max|rhs|)``; a direct
    solution that misses it is polished with conjugate gradients.  ``scale``
    is the size of the data ``rhs`` was computed from, used by the
    zero-mean check when ``rhs`` itself is mostly cancellation.

    Raises
    ------
    IncompatibleRHS
        constant nullspace and ``rhs`` (plus Neumann data) not of zero mean.
    NoConvergence
        the conjugate-gradient stage hit its iteration cap.
    """
    g = system.grid
    rhs = np.asarray(rhs, dtype=float).reshape(g.shape)
    b = system.gather(rhs - system.boundary_term())
    b = _check_compatible(system, b, scale)
    bound = tol * max(1.0, float(np.max(np.abs(system.gather(rhs)), initial=0.0)))
    if not np.any(b):
        return g.zeros()
    if method == "auto":
        method = "dense" if system.size <= DENSE_LIMIT else "direct"
    if method == "dense":
        x = _dense_solve(system, b)
    elif method == "direct":
        x = _direct_solve(system, b)
    elif method == "cg":
        x, _ = pcg(system, b, bound, x0=None if x0 is None else system.gather(x0))
    else:
        raise ValueError(f"unknown solver method {method!r}")
    if system.nullspace == "constants":
        x -= x.mean()
    res = np.max(np.abs(system.matrix @ x - b))
    if res > bound:
        x, _ = pcg(system, b, bound, x0=x)
        if system.nullspace == "constants":
            x -= x.mean()
    return system.scatter(x)


def solve_chemoattractant(
    g: Grid,
    rho: np.ndarray,
    tol: float = DEFAULT_TOL,
    *,
    system: Optional[LinearSystem] = None,
    method: str = "auto",
) -> np.ndarray:
    """Zero-mean ``S`` with ``Laplacian(S) = -(rho - mean(rho))`` on a periodic grid.

    The mean is removed from the source because the periodic problem is only
    solvable for zero-mean data; ``grad S`` does not depend on this choice.
    """
    if not g.all_periodic:
        raise ConfigError("the chemoattractant problem is posed on fully periodic grids")
    system = system or assemble_laplacian(g, BCSpec(PERIODIC))
    rho = np.asarray(rho, dtype=float).reshape(g.shape)
    mean = rho[g.fluid].mean()
    src = np.where(g.fluid, -(rho - mean), 0.0)
    return solve_pressure(system, src, tol, method=method, scale=float(np.abs(rho[g.fluid]).sum()))
