"""Named built-in scenarios at full and desk resolution."""

from __future__ import annotations

from .config import (
    GridSpec,
    InitialSpec,
    OutputSpec,
    Piece,
    ScenarioConfig,
    SteppingSpec,
    VelocitySpec,
)
from .errors import ConfigError

CORRIDOR_OBSTACLES = [[0.3, 0.7, 0.0, 0.45], [0.3, 0.7, 0.55, 1.0]]

# (full, desk) grid sizes
_RES = {
    "wall-1d-a": ((200, 1), (100, 1)),
    "wall-1d-b": ((200, 1), (100, 1)),
    "square-u1": ((300, 300), (64, 64)),
    "corridor": ((300, 300), (150, 150)),
    "ks-q10": ((300, 300), (64, 64)),
    "ks-q50": ((300, 300), (64, 64)),
}

DESCRIPTIONS = {
    "wall-1d-a": "1D, U = 1, right wall, rho0 = 0.5 on [0.1, 0.9] and 1 on [0.9, 1]",
    "wall-1d-b": "1D, U = 1, right wall, rho0 = 1 on [0.3, 0.5]",
    "square-u1": "unit square, U = (1, 0), walls, saturated block on [0.3, 0.5] x [0.25, 0.75]",
    "corridor": "two rooms joined by a corridor, U = -grad(distance to right wall)",
    "ks-q10": "periodic chemotaxis, Bernoulli start with q = 0.1",
    "ks-q50": "periodic chemotaxis, Bernoulli start with q = 0.5",
}


def names() -> list[str]:
    return list(_RES)


def builtin(name: str, desk: bool = False) -> ScenarioConfig:
    """Configuration of a named scenario."""
    if name not in _RES:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(_RES)}")
    nx, ny = _RES[name][1 if desk else 0]
    if name == "wall-1d-a":
        cfg = ScenarioConfig(
            name=name,
            grid=GridSpec(nx=nx, ny=1),
            pressure_bc="dirichlet_left",
            velocity=VelocitySpec(kind="constant", vector=[1.0]),
            initial=InitialSpec(pieces=[Piece(0.5, [0.1, 0.9]), Piece(1.0, [0.9, 1.0])]),
            stepping=SteppingSpec(t_end=4.0, snapshot_every=0.1),
        )
    elif name == "wall-1d-b":
        cfg = ScenarioConfig(
            name=name,
            grid=GridSpec(nx=nx, ny=1),
            pressure_bc="dirichlet_left",
            velocity=VelocitySpec(kind="constant", vector=[1.0]),
            initial=InitialSpec(pieces=[Piece(1.0, [0.3, 0.5])]),
            stepping=SteppingSpec(t_end=4.0, snapshot_every=0.1),
        )
    elif name == "square-u1":
        cfg = ScenarioConfig(
            name=name,
            grid=GridSpec(nx=nx, ny=ny),
            velocity=VelocitySpec(kind="constant", vector=[1.0, 0.0]),
            initial=InitialSpec(pieces=[Piece(1.0, [0.3, 0.5, 0.25, 0.75])]),
            stepping=SteppingSpec(t_end=6.0, snapshot_every=0.25),
        )
    elif name == "corridor":
        cfg = ScenarioConfig(
            name=name,
            grid=GridSpec(nx=nx, ny=ny, obstacles=[list(r) for r in CORRIDOR_OBSTACLES]),
            velocity=VelocitySpec(kind="geodesic", target="right_wall"),
            initial=InitialSpec(pieces=[Piece(1.0, [0.0, 0.2, 0.2, 0.8])]),
            stepping=SteppingSpec(t_end=12.0, snapshot_every=0.05),
        )
    else:
        # aggregation grows like exp(q (1 - q) t); lower q needs longer runs
        q, t_end, every = (0.1, 200.0, 2.0) if name == "ks-q10" else (0.5, 80.0, 0.5)
        cfg = ScenarioConfig(
            name=name,
            grid=GridSpec(nx=nx, ny=ny, bc="periodic"),
            velocity=VelocitySpec(kind="chemotaxis"),
            initial=InitialSpec(kind="bernoulli", q=q, seed=1),
            stepping=SteppingSpec(t_end=t_end, snapshot_every=every),
        )
    cfg.output = OutputSpec(directory=None)
    return cfg.validate()
