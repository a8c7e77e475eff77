"""Scenario configuration: dataclasses, JSON (de)serialisation, validation.

Configs are plain JSON documents mirroring :class:`ScenarioConfig`.  Unknown
keys are rejected so that a typo never silently falls back to a default.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

from .errors import ConfigError

MODES = ("single_active", "two_species_experimental")
PRESSURE_BCS = ("auto", "dirichlet_left", "neumann", "periodic")
VELOCITY_KINDS = ("constant", "potential", "geodesic", "chemotaxis")
INITIAL_KINDS = ("indicators", "bernoulli", "array")


@dataclass
class GridSpec:
    nx: int = 100
    ny: int = 1
    obstacles: list[list[float]] = field(default_factory=list)
    bc: Union[str, dict[str, str]] = "wall"


@dataclass
class VelocitySpec:
    kind: str = "constant"
    vector: list[float] = field(default_factory=lambda: [1.0, 0.0])
    # potential D sampled at cell centres (ny rows of nx values); U = -grad D
    values: Optional[list[list[float]]] = None
    # geodesic target: "right_wall" or a list of rectangles
    target: Union[str, list[list[float]]] = "right_wall"


@dataclass
class Piece:
    value: float
    rect: list[float]


@dataclass
class InitialSpec:
    kind: str = "indicators"
    pieces: list[Piece] = field(default_factory=list)
    q: float = 0.5
    seed: int = 0
    values: Optional[list[list[float]]] = None


@dataclass
class SteppingSpec:
    t_end: float = 1.0
    snapshot_every: float = 0.1
    cfl_safety: float = 0.45
    dt_cap: Optional[float] = None
    max_steps: Optional[int] = None
    steady_tol: float = 1e-12
    steady_window: int = 3
    solver_tol: float = 1e-10
    solver: str = "auto"


@dataclass
class OutputSpec:
    directory: Optional[str] = None
    formats: list[str] = field(default_factory=lambda: ["csv", "pgm"])


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    mode: str = "single_active"
    grid: GridSpec = field(default_factory=GridSpec)
    pressure_bc: str = "auto"
    velocity: VelocitySpec = field(default_factory=VelocitySpec)
    velocity2: Optional[VelocitySpec] = None
    initial: InitialSpec = field(default_factory=InitialSpec)
    stepping: SteppingSpec = field(default_factory=SteppingSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def validate(self) -> "ScenarioConfig":
        _validate(self)
        return self

    def to_dict(self) -> dict:
        return _to_plain(self)

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _from_plain(cls, data, "config").validate()

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def _from_plain(tp, data, path: str):
    origin = get_origin(tp)
    if origin is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        if data is None:
            if type(None) in get_args(tp):
                return None
            raise ConfigError(f"{path} must not be null")
        errors = []
        for a in args:
            try:
                return _from_plain(a, data, path)
            except ConfigError as exc:
                errors.append(str(exc))
        raise ConfigError(f"{path}: no accepted form matches ({'; '.join(errors)})")
    if dataclasses.is_dataclass(tp):
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must be an object")
        hints = get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
        kwargs = {k: _from_plain(hints[k], v, f"{path}.{k}") for k, v in data.items()}
        try:
            return tp(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if origin is list:
        if not isinstance(data, list):
            raise ConfigError(f"{path} must be a list")
        (inner,) = get_args(tp)
        return [_from_plain(inner, v, f"{path}[{i}]") for i, v in enumerate(data)]
    if origin is dict:
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must be an object")
        _, vt = get_args(tp)
        return {str(k): _from_plain(vt, v, f"{path}.{k}") for k, v in data.items()}
    if tp is float:
        if isinstance(data, bool) or not isinstance(data, (int, float)):
            raise ConfigError(f"{path} must be a number, got {data!r}")
        return float(data)
    if tp is int:
        if isinstance(data, bool) or not isinstance(data, int):
            raise ConfigError(f"{path} must be an integer, got {data!r}")
        return data
    if tp is str:
        if not isinstance(data, str):
            raise ConfigError(f"{path} must be a string, got {data!r}")
        return data
    if tp is Any:
        return data
    raise ConfigError(f"{path}: unsupported type {tp!r}")


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _validate(cfg: ScenarioConfig):
    _require(cfg.mode in MODES, f"mode must be one of {MODES}, got {cfg.mode!r}")
    _require(cfg.pressure_bc in PRESSURE_BCS, f"pressure_bc must be one of {PRESSURE_BCS}, got {cfg.pressure_bc!r}")
    g = cfg.grid
    _require(g.nx >= 3, f"grid.nx must be >= 3, got {g.nx}")
    _require(g.ny >= 1, f"grid.ny must be >= 1, got {g.ny}")
    for k, rect in enumerate(g.obstacles):
        _require(len(rect) == 4, f"grid.obstacles[{k}] needs 4 numbers")
    for name, vel in (("velocity", cfg.velocity), ("velocity2", cfg.velocity2)):
        if vel is None:
            continue
        _require(vel.kind in VELOCITY_KINDS, f"{name}.kind must be one of {VELOCITY_KINDS}, got {vel.kind!r}")
        _require(len(vel.vector) in (1, 2), f"{name}.vector needs 1 or 2 components")
        if vel.kind == "potential":
            _require(vel.values is not None, f"{name}.values is required for a potential velocity")
        if vel.kind == "geodesic" and isinstance(vel.target, str):
            _require(vel.target == "right_wall", f"{name}.target must be 'right_wall' or rectangles")
    if cfg.mode == "two_species_experimental":
        _require(cfg.velocity2 is not None, "velocity2 is required in two_species_experimental mode")
    ini = cfg.initial
    _require(ini.kind in INITIAL_KINDS, f"initial.kind must be one of {INITIAL_KINDS}, got {ini.kind!r}")
    if ini.kind == "bernoulli":
        _require(0.0 < ini.q < 1.0, f"initial.q must lie in (0, 1), got {ini.q}")
    if ini.kind == "array":
        _require(ini.values is not None, "initial.values is required for an array initial condition")
    for k, piece in enumerate(ini.pieces):
        _require(len(piece.rect) in (2, 4), f"initial.pieces[{k}].rect needs 2 or 4 numbers")
        _require(0.0 <= piece.value <= 1.0, f"initial.pieces[{k}].value must lie in [0, 1]")
    st = cfg.stepping
    _require(st.t_end > 0, f"stepping.t_end must be positive, got {st.t_end}")
    _require(st.snapshot_every > 0, f"stepping.snapshot_every must be positive, got {st.snapshot_every}")
    _require(0.0 < st.cfl_safety < 0.5, f"stepping.cfl_safety must lie in (0, 0.5), got {st.cfl_safety}")
    _require(st.dt_cap is None or st.dt_cap > 0, "stepping.dt_cap must be positive")
    _require(st.max_steps is None or st.max_steps > 0, "stepping.max_steps must be positive")
    _require(st.steady_window >= 1, "stepping.steady_window must be >= 1")
    _require(st.solver_tol > 0, "stepping.solver_tol must be positive")
    _require(st.solver in ("auto", "dense", "direct", "cg"), f"stepping.solver unknown: {st.solver!r}")
    for fmt in cfg.output.formats:
        _require(fmt in ("csv", "pgm"), f"output.formats entries must be 'csv' or 'pgm', got {fmt!r}")
