"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io, scenarios
from .config import OutputSpec, ScenarioConfig
from .errors import ConfigError, NumericalError
from .exact1d import PiecewiseConstant1D, exact_entropy_solution, l1_distance
from .ot1d import Density1D, JKOParams, jko_step
from .sim import grid_from_config, initial_density, run, run_two_species

log = logging.getLogger("satflow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def load_config(ref: str, desk: bool = False) -> ScenarioConfig:
    """A JSON file path or the name of a built-in scenario."""
    p = Path(ref)
    if p.is_file():
        return ScenarioConfig.load(p)
    if ref in scenarios.names():
        return scenarios.builtin(ref, desk=desk)
    raise ConfigError(f"{ref!r} is neither a config file nor a built-in scenario")


def _parse_resolution(text: str) -> tuple[int, Optional[int]]:
    try:
        parts = [int(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError(f"--resolution expects NX or NX,NY, got {text!r}") from None
    if len(parts) == 1:
        return parts[0], None
    if len(parts) == 2:
        return parts[0], parts[1]
    raise ConfigError(f"--resolution expects NX or NX,NY, got {text!r}")


def with_resolution(cfg: ScenarioConfig, nx: int, ny: Optional[int] = None) -> ScenarioConfig:
    """Same scenario on another grid (``ny`` follows ``nx`` for square 2D grids)."""
    g = cfg.grid
    if ny is None:
        ny = 1 if g.ny == 1 else (nx if g.ny == g.nx else g.ny)
    grid = type(g)(nx=nx, ny=ny, obstacles=g.obstacles, bc=g.bc)
    return cfg.replace(grid=grid).validate()


def _piecewise_initial(cfg: ScenarioConfig) -> PiecewiseConstant1D:
    ini = cfg.initial
    if cfg.grid.ny != 1 or ini.kind != "indicators":
        raise ConfigError("oracle1d needs a 1D scenario with an indicator initial condition")
    return PiecewiseConstant1D.from_indicators([(p.rect[0], p.rect[1], p.value) for p in ini.pieces])


# --- subcommands -----------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.desk)
    if args.resolution:
        cfg = with_resolution(cfg, *_parse_resolution(args.resolution))
    if args.seed is not None:
        cfg = cfg.replace(initial=dataclasses.replace(cfg.initial, seed=args.seed))
    out = args.out or cfg.output.directory or f"out_{cfg.name}"
    cfg = cfg.replace(output=OutputSpec(directory=out, formats=cfg.output.formats)).validate()
    Path(out).mkdir(parents=True, exist_ok=True)
    (Path(out) / "config.json").write_text(cfg.to_json())
    runner = run_two_species if cfg.mode == "two_species_experimental" else run
    traj = runner(cfg)
    fin = traj.final
    print(f"{cfg.name}: {traj.steps} steps, t = {fin.time:.6g}, steady = {traj.steady}")
    print(f"mass {fin.diagnostics['mass1']:.12g}, min {fin.diagnostics['min']:.3g}, "
          f"max {fin.diagnostics['max']:.3g}, components {fin.diagnostics['components']}")
    print(f"output written to {out}")
    return EXIT_OK


def oracle_table(cfg: ScenarioConfig, resolutions: Sequence[int], t: float, refine: int = 16) -> list[dict]:
    """Solver vs entropy-solution errors at time ``t`` for each resolution."""
    rho0 = _piecewise_initial(cfg)
    U = float(cfg.velocity.vector[0])
    if cfg.velocity.kind != "constant":
        raise ConfigError("oracle1d needs a constant desired velocity")
    rows = []
    for nx in resolutions:
        c = with_resolution(cfg, nx)
        c.stepping = dataclasses.replace(c.stepping, t_end=t, snapshot_every=t)
        c.output = OutputSpec(directory=None)
        traj = run(c, write=False)
        num = traj.final.rho.ravel()
        ref = exact_entropy_solution(rho0, U, t, nx, refine=refine).values
        rows.append({"nx": nx, "l1": l1_distance(num, ref), "linf": float(np.max(np.abs(num - ref)))})
    for prev, row in zip(rows, rows[1:]):
        row["order"] = float(np.log(prev["l1"] / row["l1"]) / np.log(row["nx"] / prev["nx"]))
    return rows


def cmd_oracle1d(args) -> int:
    cfg = load_config(args.config, args.desk)
    res = [int(s) for s in args.resolutions.split(",")]
    rows = oracle_table(cfg, res, args.time, args.refine)
    print(f"{'nx':>6} {'L1':>12} {'Linf':>12} {'order':>7}")
    for r in rows:
        order = f"{r['order']:7.3f}" if "order" in r else f"{'-':>7}"
        print(f"{r['nx']:6d} {r['l1']:12.4e} {r['linf']:12.4e} {order}")
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2))
    return EXIT_OK


def matched_dt(cfg: ScenarioConfig) -> float:
    """First CFL time step the finite-volume solver takes on ``cfg``."""
    c = cfg.replace(output=OutputSpec(directory=None))
    c.stepping = dataclasses.replace(c.stepping, max_steps=1)
    return run(c.validate(), write=False).dt_history[0]


def jko_compare(cfg: ScenarioConfig, steps: int = 10, tau: Optional[float] = None, n: Optional[int] = None) -> dict:
    """JKO stepper and finite-volume solver over the same ``steps * tau``.

    ``tau`` defaults to :func:`matched_dt`; the finite-volume run is capped at
    ``tau`` per step and sampled every ``tau``.

    The potential of the active species is ``-U x`` for a constant ``U`` (or
    the configured values); the passive species has potential 0.
    """
    if n is not None:
        cfg = with_resolution(cfg, n)
    if cfg.grid.ny != 1:
        raise ConfigError("jko comparison needs a 1D scenario")
    g = grid_from_config(cfg)
    x = g.centers[0].ravel()
    if cfg.velocity.kind == "constant":
        D1 = -float(cfg.velocity.vector[0]) * x
    elif cfg.velocity.kind == "potential":
        D1 = np.asarray(cfg.velocity.values, dtype=float).ravel()
    else:
        raise ConfigError("jko comparison needs a constant or potential velocity")
    D2 = np.zeros_like(D1)
    tau = matched_dt(cfg) if tau is None else tau
    rho0 = initial_density(cfg, g).ravel()

    jko = [rho0.copy()]
    objectives = []
    cur = Density1D(rho0)
    for _ in range(steps):
        res = jko_step(cur, D1, D2, JKOParams(tau=tau))
        objectives.append((res.initial_objective, res.objective))
        cur = res.rho
        jko.append(cur.values.copy())

    c = cfg.replace(output=OutputSpec(directory=None))
    c.stepping = dataclasses.replace(c.stepping, t_end=steps * tau, snapshot_every=tau, dt_cap=tau)
    traj = run(c.validate(), write=False)
    fv = [s.rho.ravel() for s in traj.snapshots]
    gaps = [float(np.sum(np.abs(a - b)) * g.dx) for a, b in zip(jko, fv)]
    return {
        "tau": tau,
        "mass": float(rho0.sum() * g.dx),
        "jko": jko,
        "fv": fv,
        "gaps": gaps,
        "objectives": objectives,
        "fv_dt": traj.dt_history,
    }


def cmd_jko(args) -> int:
    cfg = load_config(args.config, args.desk)
    out = jko_compare(cfg, args.steps, args.tau, args.n)
    print(f"tau = {out['tau']:.4g}, mass = {out['mass']:.6g}")
    print(f"{'step':>5} {'L1 gap':>12}")
    for k, gap in enumerate(out["gaps"]):
        print(f"{k:5d} {gap:12.4e}")
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        io.write_csv(d / "jko.csv", np.array(out["jko"]))
        io.write_csv(d / "fv.csv", np.array(out["fv"]))
        io.write_csv(d / "gap.csv", np.array(out["gaps"]))
        print(f"trajectories written to {d}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    if args.action == "list":
        for name in scenarios.names():
            full = scenarios.builtin(name).grid
            desk = scenarios.builtin(name, desk=True).grid
            print(f"{name:10s} {full.nx}x{full.ny} (desk {desk.nx}x{desk.ny})  {scenarios.DESCRIPTIONS[name]}")
        return EXIT_OK
    if not args.name:
        raise ConfigError("scenarios emit needs a scenario name")
    print(scenarios.builtin(args.name, desk=args.desk).to_json())
    return EXIT_OK


def _sweep_one(payload):
    cfg_json, seed, out = payload
    cfg = ScenarioConfig.from_json(cfg_json)
    cfg = cfg.replace(initial=dataclasses.replace(cfg.initial, seed=seed))
    cfg = cfg.replace(output=OutputSpec(directory=out, formats=cfg.output.formats))
    traj = run(cfg)
    return seed, traj.final.diagnostics["components"], traj.final.time


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.desk)
    base = Path(args.out or f"sweep_{cfg.name}")
    jobs = [(cfg.to_json(), s, str(base / f"seed_{s}")) for s in args.seeds]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for seed, comps, t in pool.map(_sweep_one, jobs):
            print(f"seed {seed}: t = {t:.4g}, components {comps}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="satflow", description="Saturated two-species transport solver.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("config", help="JSON config file or built-in scenario name")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--resolution", help="NX or NX,NY")
    r.add_argument("--desk", action="store_true", help="desk resolution of a built-in")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle1d", help="compare a 1D run with the entropy solution")
    o.add_argument("config")
    o.add_argument("--resolutions", default="100,200,400")
    o.add_argument("--time", type=float, default=0.2)
    o.add_argument("--refine", type=int, default=16)
    o.add_argument("--json", help="write the table as JSON")
    o.add_argument("--desk", action="store_true")
    o.set_defaults(func=cmd_oracle1d)

    j = sub.add_parser("jko", help="JKO stepper vs finite volumes in 1D")
    j.add_argument("config")
    j.add_argument("--steps", type=int, default=10)
    j.add_argument("--tau", type=float)
    j.add_argument("--n", type=int, default=32)
    j.add_argument("--out")
    j.add_argument("--desk", action="store_true")
    j.set_defaults(func=cmd_jko)

    s = sub.add_parser("scenarios", help="list or print built-in scenarios")
    s.add_argument("action", choices=["list", "emit"])
    s.add_argument("name", nargs="?")
    s.add_argument("--desk", action="store_true")
    s.set_defaults(func=cmd_scenarios)

    w = sub.add_parser("sweep", help="run one scenario over several seeds in parallel")
    w.add_argument("config")
    w.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    w.add_argument("--jobs", type=int, default=2)
    w.add_argument("--out")
    w.add_argument("--desk", action="store_true")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
