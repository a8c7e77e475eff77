import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from satflow.io import (
    DIAG_COLUMNS,
    read_csv,
    read_pgm,
    step_name,
    write_csv,
    write_diagnostics,
    write_pgm,
    write_snapshot,
)


def test_step_name():
    assert step_name("rho", 42, "csv") == "rho_000042.csv"


@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_roundtrip_is_exact(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("csv") / "a.csv"
    write_csv(p, a)
    assert np.array_equal(read_csv(p), a)


def test_pgm_orientation_and_scale(tmp_path):
    rho = np.zeros((2, 3))
    rho[0, 0] = 1.0  # bottom-left cell, full
    rho[1, 2] = 0.5
    write_pgm(tmp_path / "a.pgm", rho)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n3 2\n255\n")
    pix = read_pgm(tmp_path / "a.pgm")
    assert pix.shape == (2, 3)
    assert pix[1, 0] == 0  # black, last image row is the bottom
    assert pix[0, 2] == 128
    assert pix[0, 0] == 255


def test_pgm_clips(tmp_path):
    write_pgm(tmp_path / "c.pgm", np.array([[-0.1, 1.2]]))
    assert read_pgm(tmp_path / "c.pgm").tolist() == [[255, 0]]


def test_read_pgm_rejects_other_formats(tmp_path):
    (tmp_path / "x.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "x.pgm")


def test_snapshot_files(tmp_path):
    rho = np.full((2, 2), 0.25)
    write_snapshot(tmp_path, 7, rho, -rho, rho2=1 - rho)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["p_000007.csv", "rho2_000007.csv", "rho_000007.csv", "rho_000007.pgm"]
    write_snapshot(tmp_path / "only", 1, rho, rho, formats=("pgm",))
    assert [p.name for p in (tmp_path / "only").iterdir()] == ["rho_000001.pgm"]


def test_diagnostics_file(tmp_path):
    row = dict(time=0.5, dt=0.01, mass1=0.2, mass2=0.8, min=0.0, max=1.0, winf=2.0, components=3, drift=0.0)
    write_diagnostics(tmp_path, [row, row])
    lines = (tmp_path / "diag.csv").read_text().splitlines()
    assert lines[0] == ",".join(DIAG_COLUMNS)
    assert lines[1].split(",")[-1] == "3"
    assert float(lines[1].split(",")[0]) == 0.5
