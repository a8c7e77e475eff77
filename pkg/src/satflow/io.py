"""Snapshot and diagnostics files.

* ``rho_<step>.csv`` / ``p_<step>.csv``: ``ny`` rows of ``nx`` comma-separated
  values, row 0 is ``j = 0`` (bottom), 17 significant digits.
* ``rho_<step>.pgm``: binary P5, 8 bit, ``rho = 0`` white and ``rho = 1``
  black; the first image row is the top of the domain.
* ``diag.csv``: one line per snapshot.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

DIAG_COLUMNS = ("time", "dt", "mass1", "mass2", "min", "max", "winf", "components")


def step_name(prefix: str, step: int, ext: str) -> str:
    return f"{prefix}_{step:06d}.{ext}"


def write_csv(path, field: np.ndarray):
    np.savetxt(path, np.atleast_2d(field), fmt="%.17g", delimiter=",")


def read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_pgm(path, rho: np.ndarray):
    img = np.clip(np.atleast_2d(rho), 0.0, 1.0)
    pix = np.rint(255.0 * (1.0 - img)).astype(np.uint8)[::-1]
    ny, nx = pix.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    """Pixel array of a P5 file, in file row order."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: nx * ny], dtype=np.uint8).reshape(ny, nx)


def write_snapshot(directory, step: int, rho, p, rho2=None, formats=("csv", "pgm")):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if "csv" in formats:
        write_csv(d / step_name("rho", step, "csv"), rho)
        write_csv(d / step_name("p", step, "csv"), p)
        if rho2 is not None:
            write_csv(d / step_name("rho2", step, "csv"), rho2)
    if "pgm" in formats:
        write_pgm(d / step_name("rho", step, "pgm"), rho)


def write_diagnostics(directory, rows):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "diag.csv", "w") as fh:
        fh.write(",".join(DIAG_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(format(float(row[c]), ".17g") if c != "components" else str(int(row[c]))
                              for c in DIAG_COLUMNS) + "\n")
