"""Time loop: desired velocity -> pressure projection -> CFL step -> upwind update."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from . import io
from .config import ScenarioConfig, VelocitySpec
from .errors import ConfigError, ConstraintDrift, NumericalError, SimulationError
from .grid import FaceField, Grid, build_grid, total_mass
from .poisson import BCSpec, DIRICHLET_LEFT_1D, NEUMANN, PERIODIC, LinearSystem, assemble_laplacian
from .projection import correction_velocity_multi
from .transport import StepParams, advect_step, cfl_dt
from .velocity import (
    CHEMOTAXIS,
    CONSTANT,
    GEODESIC,
    POTENTIAL,
    PotentialSpec,
    desired_velocity,
    right_wall_target,
)

log = logging.getLogger(__name__)

SATURATION_THRESHOLD = 0.99


@dataclass
class Snapshot:
    step: int
    time: float
    rho: np.ndarray
    p: np.ndarray
    diagnostics: dict
    rho2: Optional[np.ndarray] = None


@dataclass
class StepInfo:
    """What an observer sees after each step."""

    step: int
    time: float  # time before the step
    dt: float
    rho: list  # densities before the step
    rho_new: list
    U: list
    w: FaceField
    p: np.ndarray


@dataclass
class Trajectory:
    grid: Grid
    snapshots: list = field(default_factory=list)
    dt_history: list = field(default_factory=list)
    steady: bool = False
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def at(self, t: float) -> Snapshot:
        """Snapshot whose time equals ``t`` (to 1e-9)."""
        for s in self.snapshots:
            if abs(s.time - t) <= 1e-9 * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")


# --- setup helpers --------------------------------------------------------


def bernoulli_init(g: Grid, q: float, seed: int) -> np.ndarray:
    """Each fluid cell is 1 with probability ``q``, 0 otherwise."""
    if not 0.0 < q < 1.0:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    rng = np.random.default_rng(seed)
    rho = (rng.random(g.shape) < q).astype(float)
    rho[g.solid] = 0.0
    return rho


def rect_average(g: Grid, rect) -> np.ndarray:
    """Fraction of each cell covered by ``[x0, x1] x [y0, y1]``."""
    x0, x1 = rect[0], rect[1]
    y0, y1 = (rect[2], rect[3]) if len(rect) == 4 else (0.0, 1.0)
    ex = np.linspace(0.0, 1.0, g.nx + 1)
    ey = np.linspace(0.0, 1.0, g.ny + 1)
    fx = np.clip(np.minimum(ex[1:], x1) - np.maximum(ex[:-1], x0), 0.0, None) * g.nx
    fy = np.clip(np.minimum(ey[1:], y1) - np.maximum(ey[:-1], y0), 0.0, None) * g.ny
    return fy[:, None] * fx[None, :]


def initial_density(cfg: ScenarioConfig, g: Grid) -> np.ndarray:
    ini = cfg.initial
    if ini.kind == "bernoulli":
        return bernoulli_init(g, ini.q, ini.seed)
    if ini.kind == "array":
        rho = np.asarray(ini.values, dtype=float)
        if rho.size != g.nx * g.ny:
            raise ConfigError(f"initial.values has {rho.size} entries, grid has {g.nx * g.ny}")
        rho = rho.reshape(g.shape)
    else:
        rho = g.zeros()
        for piece in ini.pieces:
            rho += piece.value * rect_average(g, piece.rect)
    rho = g.clean(rho)
    if rho.min() < -1e-12 or rho.max() > 1 + 1e-12:
        raise ConfigError("initial density must lie in [0, 1]")
    return np.clip(rho, 0.0, 1.0)


def grid_from_config(cfg: ScenarioConfig) -> Grid:
    return build_grid(cfg.grid.nx, cfg.grid.ny, cfg.grid.obstacles, cfg.grid.bc)


def pressure_bc(cfg: ScenarioConfig, g: Grid) -> BCSpec:
    kind = cfg.pressure_bc
    if kind == "dirichlet_left":
        return BCSpec(DIRICHLET_LEFT_1D)
    if kind == "periodic":
        return BCSpec(PERIODIC)
    if kind == "neumann":
        return BCSpec(NEUMANN)
    return BCSpec(PERIODIC) if g.all_periodic else BCSpec(NEUMANN)


def potential_spec(vel: VelocitySpec, g: Grid) -> PotentialSpec:
    if vel.kind == "constant":
        return PotentialSpec(CONSTANT, tuple(vel.vector))
    if vel.kind == "potential":
        D = np.asarray(vel.values, dtype=float)
        if D.size != g.nx * g.ny:
            raise ConfigError(f"potential has {D.size} values, grid has {g.nx * g.ny} cells")
        return PotentialSpec(POTENTIAL, D.reshape(g.shape))
    if vel.kind == "geodesic":
        if isinstance(vel.target, str):
            target = right_wall_target(g)
        else:
            target = np.zeros(g.shape, dtype=bool)
            for rect in vel.target:
                target |= rect_average(g, rect) > 0.5
            target &= g.fluid
        return PotentialSpec(GEODESIC, target)
    return PotentialSpec(CHEMOTAXIS)


def saturated_components(rho: np.ndarray, g: Grid, threshold: float = SATURATION_THRESHOLD) -> int:
    """Number of 4-connected components of ``{rho >= threshold}`` (periodic sides wrap)."""
    sat = (np.asarray(rho).reshape(g.shape) >= threshold) & g.fluid
    labels, n = ndimage.label(sat)
    if n == 0:
        return 0
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    if g.periodic_x:
        for a, b in zip(labels[:, 0], labels[:, -1]):
            if a and b:
                union(a, b)
    if g.periodic_y and g.ny > 1:
        for a, b in zip(labels[0, :], labels[-1, :]):
            if a and b:
                union(a, b)
    return len({find(k) for k in range(1, n + 1)})


def isoperimetric_ratio(rho: np.ndarray, g: Grid, threshold: float = SATURATION_THRESHOLD) -> float:
    """``4 pi area / perimeter^2`` of the saturated set.

    Perimeter counts cell edges between saturated and unsaturated cells,
    periodic wrap included.  A staircase boundary is as long as that of the
    bounding box, so a digitized disc gives about ``pi^2 / 16`` and an
    axis-aligned square ``pi / 4``; a band wrapping
    around the torus has a short perimeter and can exceed 1.  A set with no
    boundary returns ``nan``.
    """
    sat = (np.asarray(rho).reshape(g.shape) >= threshold) & g.fluid
    area = sat.sum() * g.cell_volume
    s = sat.astype(int)
    px = np.abs(np.diff(s, axis=1)).sum() + (np.abs(s[:, 0] - s[:, -1]).sum() if g.periodic_x else s[:, 0].sum() + s[:, -1].sum())
    py = 0
    if g.ny > 1:
        py = np.abs(np.diff(s, axis=0)).sum() + (np.abs(s[0] - s[-1]).sum() if g.periodic_y else s[0].sum() + s[-1].sum())
    perim = px * g.dy + py * g.dx
    return float(4 * np.pi * area / perim**2) if perim > 0 else float("nan")


# --- the time loop --------------------------------------------------------


class Simulation:
    """Stateful stepper behind :func:`run` and :func:`run_two_species`."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.validate()
        self.grid = grid_from_config(cfg)
        g = self.grid
        self.bc = pressure_bc(cfg, g)
        self.system: LinearSystem = assemble_laplacian(g, self.bc)
        self.two = cfg.mode == "two_species_experimental"
        specs = [potential_spec(cfg.velocity, g)]
        if self.two:
            specs.append(potential_spec(cfg.velocity2, g))
        self.specs = specs
        if any(s.kind == CHEMOTAXIS for s in specs) and not g.all_periodic:
            raise ConfigError("chemotaxis needs a fully periodic grid")
        self.chem_system = self.system if self.bc.kind == PERIODIC else None
        st = cfg.stepping
        self.tol = st.solver_tol
        self.method = st.solver
        rho1 = initial_density(cfg, g)
        self.rho = [rho1, g.clean(1.0 - rho1)] if self.two else [rho1]
        self._static_U = [None if s.kind == CHEMOTAXIS else desired_velocity(s, None, g) for s in specs]
        self.mass0 = [total_mass(r, g) for r in self.rho]

    def velocities(self) -> list:
        out = []
        for spec, U, rho in zip(self.specs, self._static_U, self.rho):
            if U is None:
                # chemoattractant emitted by the active species
                U = desired_velocity(spec, self.rho[0], self.grid, tol=self.tol, system=self.chem_system)
            out.append(U)
        return out

    def diagnostics(self, w: FaceField, dt: float) -> dict:
        g = self.grid
        r1 = self.rho[0]
        mass2 = total_mass(self.rho[1], g) if self.two else total_mass(g.clean(1.0 - r1), g)
        diag = {
            "mass1": total_mass(r1, g),
            "mass2": mass2,
            "min": float(r1[g.fluid].min()),
            "max": float(r1[g.fluid].max()),
            "winf": w.norm_inf(),
            "dt": dt,
            "components": saturated_components(r1, g),
        }
        if self.two:
            diag["drift"] = float(np.max(np.abs(self.rho[0] + self.rho[1] - 1.0)[g.fluid]))
        return diag

    def run(self, observer: Optional[Callable[[StepInfo], None]] = None, write: bool = True) -> Trajectory:
        cfg, g = self.cfg, self.grid
        st = cfg.stepping
        n_snap = int(np.floor(st.t_end / st.snapshot_every + 1e-9))
        snap_times = sorted({k * st.snapshot_every for k in range(n_snap + 1)} | {st.t_end})
        snap_times = [s for s in snap_times if s <= st.t_end]
        traj = Trajectory(g)
        out_dir = cfg.output.directory if write else None
        t, step, last_dt = 0.0, 0, 0.0
        next_snap = 0
        quiet = 0
        drift_warned = False
        while True:
            try:
                Us = self.velocities()
                w, p = correction_velocity_multi(
                    self.rho, Us, g, tol=self.tol, system=self.system, method=self.method
                )
            except NumericalError as exc:
                raise SimulationError(step, t, exc) from exc
            at_snap = next_snap < len(snap_times) and t >= snap_times[next_snap] - 1e-12 * max(1.0, t)
            done = (t >= st.t_end - 1e-12 * max(1.0, st.t_end)) or traj.steady
            if st.max_steps is not None and step >= st.max_steps:
                done = True
            if at_snap or done:
                diag = self.diagnostics(w, last_dt)
                diag["time"] = t
                snap = Snapshot(step, t, self.rho[0].copy(), p, diag, self.rho[1].copy() if self.two else None)
                traj.snapshots.append(snap)
                if out_dir:
                    io.write_snapshot(out_dir, step, snap.rho, p, snap.rho2, cfg.output.formats)
                while next_snap < len(snap_times) and snap_times[next_snap] <= t + 1e-12 * max(1.0, t):
                    next_snap += 1
            if done:
                break
            cap = snap_times[next_snap] - t
            if st.dt_cap is not None:
                cap = min(cap, st.dt_cap)
            params = StepParams(st.cfl_safety, cap)
            try:
                dt = min(cfl_dt(U, w, g, params) for U in Us)
                new = [advect_step(r, U, w, dt, g, params) for r, U in zip(self.rho, Us)]
            except NumericalError as exc:
                raise SimulationError(step, t, exc) from exc
            if observer is not None:
                observer(StepInfo(step, t, dt, self.rho, new, Us, w, p))
            change = sum(float(np.abs(a - b).sum()) for a, b in zip(new, self.rho)) * g.cell_volume
            self.rho = new
            t_target = snap_times[next_snap]
            t = t_target if t + dt >= t_target - 1e-12 * max(1.0, t_target) else t + dt
            step += 1
            last_dt = dt
            traj.dt_history.append(dt)
            quiet = quiet + 1 if change / dt <= st.steady_tol else 0
            if quiet >= st.steady_window:
                traj.steady = True
                log.info("steady state detected at t=%.6g (step %d)", t, step)
            if self.two and not drift_warned:
                drift = float(np.max(np.abs(new[0] + new[1] - 1.0)[g.fluid]))
                if drift / t > 10.0 * dt:
                    warnings.warn(f"rho1 + rho2 drifted by {drift:.3e} at t={t:.4g}", ConstraintDrift)
                    drift_warned = True
        traj.steps = step
        if out_dir:
            rows = [s.diagnostics for s in traj.snapshots]
            io.write_diagnostics(out_dir, rows)
        return traj


def run(config: ScenarioConfig, observer: Optional[Callable[[StepInfo], None]] = None, write: bool = True) -> Trajectory:
    """Run a scenario and return its snapshots.

    ``observer`` is called after every step with a :class:`StepInfo`.
    Stops at ``t_end``, after ``max_steps`` or once the L1 change per unit
    time stays below ``steady_tol`` for ``steady_window`` consecutive steps;
    a final snapshot is always recorded.
    """
    return Simulation(config).run(observer, write)


def run_two_species(config: ScenarioConfig, observer=None, write: bool = True) -> Trajectory:
    """Experimental two-species run; ``rho2`` starts at ``1 - rho1``.

    Both species carry their own desired velocity plus the shared correction.
    The constraint drift ``max|rho1 + rho2 - 1|`` is reported per snapshot,
    never corrected.
    """
    if config.mode != "two_species_experimental":
        config = config.replace(mode="two_species_experimental")
    if config.velocity2 is None:
        config = config.replace(velocity2=VelocitySpec(kind="constant", vector=[0.0, 0.0]))
    return Simulation(config).run(observer, write)
