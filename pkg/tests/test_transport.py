import numpy as np
import pytest
from hypothesis import given, strategies as st

from satflow.errors import CFLViolation, ConfigError, ZeroVelocityNoCap
from satflow.grid import FaceField, build_grid, total_mass
from satflow.transport import (
    StepParams,
    advect_step,
    cfl_dt,
    flux_divergence,
    upwind_face_flux,
    upwind_flux,
)


def random_field(g, r):
    f = FaceField(r.normal(size=(g.ny, g.nx + 1)), r.normal(size=(g.ny + 1, g.nx)))
    if g.periodic_x:
        f.x[:, -1] = f.x[:, 0]
    if g.periodic_y:
        f.y[-1] = f.y[0]
    return f.masked(g)


def const_field(g, ux, uy=0.0):
    return FaceField(np.full((g.ny, g.nx + 1), ux), np.full((g.ny + 1, g.nx), uy)).masked(g)


def test_upwind_flux_scalar():
    assert upwind_flux(2.0, 0.3, 0.7) == pytest.approx(0.6)
    assert upwind_flux(-2.0, 0.3, 0.7) == pytest.approx(-1.4)
    assert upwind_flux(0.0, 0.3, 0.7) == 0.0
    assert isinstance(upwind_flux(1.0, 0.1, 0.2), float)


@given(st.floats(-10, 10), st.floats(0, 1), st.floats(0, 1))
def test_upwind_flux_complement(u, a, b):
    # A(u, 1 - a, 1 - b) = u - A(u, a, b)
    assert upwind_flux(u, 1 - a, 1 - b) == pytest.approx(u - upwind_flux(u, a, b), abs=1e-12)


def test_periodic_1d_step_matches_formula(rng):
    g = build_grid(20, bc="periodic")
    rho = rng.uniform(0, 1, g.shape)
    U = const_field(g, 1.5)
    w = g.zero_faces()
    dt = 0.3 * g.dx / 1.5
    new = advect_step(rho, U, w, dt, g)
    c = 1.5 * dt / g.dx
    expected = rho - c * (rho - np.roll(rho, 1, axis=1))
    assert np.max(np.abs(new - expected)) < 1e-14


def test_wall_faces_carry_no_flux(rng):
    g = build_grid(10, 8)
    rho = rng.uniform(0, 1, g.shape)
    f = upwind_face_flux(rho, const_field(g, 1.0, -1.0) + FaceField(np.ones((8, 11)), np.ones((9, 10))), g)
    assert not f.x[:, [0, -1]].any() and not f.y[[0, -1], :].any()


@given(
    st.integers(3, 16),
    st.integers(1, 16),
    st.sampled_from(["wall", "periodic"]),
    st.integers(0, 2**31 - 1),
)
def test_step_conserves_mass(nx, ny, bc, seed):
    g = build_grid(nx, ny, bc=bc)
    r = np.random.default_rng(seed)
    rho = r.uniform(0, 1, g.shape)
    U = random_field(g, r)
    w = random_field(g, r)
    dt = cfl_dt(U, w, g)
    new = advect_step(rho, U, w, dt, g)
    assert abs(total_mass(new, g) - total_mass(rho, g)) <= 1e-13 * max(1.0, total_mass(rho, g))


@given(st.integers(3, 16), st.integers(0, 2**31 - 1))
def test_single_field_step_stays_nonnegative(nx, seed):
    # a pure transport step under CFL is monotone: it keeps rho >= 0
    g = build_grid(nx, nx, bc="periodic")
    r = np.random.default_rng(seed)
    rho = r.uniform(0, 1, g.shape)
    U = random_field(g, r)
    new = advect_step(rho, U, g.zero_faces(), cfl_dt(U, g.zero_faces(), g), g)
    assert new.min() >= -1e-15


def test_flux_divergence_of_uniform_flux_is_zero():
    g = build_grid(6, 6, bc="periodic")
    f = FaceField(np.full((6, 7), 2.0), np.full((7, 6), -1.0))
    assert np.max(np.abs(flux_divergence(f, g))) == 0.0


def test_cfl_dt():
    g = build_grid(10, 20)
    U = const_field(g, 2.0, 1.0)
    w = const_field(g, -1.0)
    assert cfl_dt(U, w, g) == pytest.approx(0.45 * g.h / 4.0)
    assert cfl_dt(U, w, g, StepParams(0.25, 1e-4)) == 1e-4
    assert cfl_dt(g.zero_faces(), g.zero_faces(), g, StepParams(dt_cap=0.1)) == 0.1
    with pytest.raises(ZeroVelocityNoCap):
        cfl_dt(g.zero_faces(), g.zero_faces(), g)


def test_cfl_violation():
    g = build_grid(10)
    U = const_field(g, 1.0)
    with pytest.raises(CFLViolation):
        advect_step(np.zeros(g.shape), U, g.zero_faces(), g.dx, g)


@pytest.mark.parametrize("kw", [{"cfl_safety": 0.5}, {"cfl_safety": 0.0}, {"dt_cap": -1.0}])
def test_step_params_validation(kw):
    with pytest.raises(ConfigError):
        StepParams(**kw)


def test_solid_cells_stay_empty(rng):
    g = build_grid(12, 12, [[0.4, 0.6, 0.4, 0.6]])
    rho = g.clean(rng.uniform(0, 1, g.shape))
    U = const_field(g, 1.0, 0.5)
    new = advect_step(rho, U, g.zero_faces(), cfl_dt(U, g.zero_faces(), g), g)
    assert not new[g.solid].any()
