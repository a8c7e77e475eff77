import numpy as np
import pytest
from hypothesis import given, strategies as st

from satflow.grid import FaceField, build_grid
from satflow.poisson import DIRICHLET_LEFT_1D, BCSpec, assemble_laplacian
from satflow.projection import (
    correction_velocity,
    correction_velocity_multi,
    divergence_upwind,
    face_difference,
)
from satflow.transport import advect_step, cfl_dt, upwind_face_flux


def smooth_potential_field(g, r):
    """``-grad D`` for a random trigonometric ``D``; consistent on periodic faces."""
    from satflow.velocity import potential_velocity

    X, Y = g.centers
    D = np.zeros(g.shape)
    for _ in range(3):
        k, l = r.integers(1, 3, size=2)
        D += r.normal() * np.cos(2 * np.pi * (k * X + r.uniform())) * np.cos(2 * np.pi * (l * Y + r.uniform()))
    return potential_velocity(D, g)


def blocky_density(g, r):
    rho = r.uniform(0, 1, g.shape)
    rho[r.uniform(size=g.shape) < 0.4] = 1.0
    return g.clean(rho)


@given(st.integers(4, 14), st.integers(1, 14), st.sampled_from(["wall", "periodic"]), st.integers(0, 2**31 - 1))
def test_correction_is_divergence_correction(nx, ny, bc, seed):
    # div(w) = -div_h(A^up(U, rho)) cell by cell
    g = build_grid(nx, ny, bc=bc)
    r = np.random.default_rng(seed)
    rho = blocky_density(g, r)
    U = smooth_potential_field(g, r)
    w, p = correction_velocity(rho, U, g, tol=1e-12)
    div_w = (w.x[:, 1:] - w.x[:, :-1]) / g.dx + (w.y[1:] - w.y[:-1]) / g.dy
    assert np.max(np.abs(div_w + divergence_upwind(rho, U, g))) < 1e-8


@given(st.integers(4, 14), st.integers(1, 14), st.sampled_from(["wall", "periodic"]), st.integers(0, 2**31 - 1))
def test_step_keeps_density_in_unit_interval(nx, ny, bc, seed):
    g = build_grid(nx, ny, bc=bc)
    r = np.random.default_rng(seed)
    rho = blocky_density(g, r)
    U = smooth_potential_field(g, r)
    for _ in range(5):
        w, _ = correction_velocity(rho, U, g, tol=1e-12)
        rho = advect_step(rho, U, w, cfl_dt(U, w, g), g)
        assert rho.min() >= -1e-12 and rho.max() <= 1 + 1e-12


def test_mu_identity_one_step(rng):
    # 1 - rho after a step equals mu = 1 - rho upwinded by w alone
    g = build_grid(48)
    rho = blocky_density(g, rng)
    U = smooth_potential_field(g, rng)
    w, _ = correction_velocity(rho, U, g, tol=1e-12, method="dense")
    dt = cfl_dt(U, w, g)
    new = advect_step(rho, U, w, dt, g)
    mu_new = advect_step(1 - rho, g.zero_faces(), w, dt, g)
    assert np.max(np.abs((1 - new) - mu_new)) < 1e-12


def test_saturated_block_translates_freely():
    # U points along a saturated strip with nothing ahead: no pressure needed
    g = build_grid(20, 20, bc="periodic")
    rho = np.zeros(g.shape)
    rho[:, 5:9] = 1.0
    U = FaceField(np.zeros((20, 21)), np.ones((21, 20)))
    w, p = correction_velocity(rho, U, g)
    assert w.norm_inf() < 1e-10


def test_wall_pushes_back_1d():
    # a block pressed against the right wall feels w = -U inside it
    g = build_grid(20)
    rho = np.zeros(g.shape)
    rho[0, 15:] = 1.0
    U = FaceField(np.ones((1, 21)), np.zeros((2, 20))).masked(g)
    w, p = correction_velocity(rho, U, g)
    assert np.allclose(w.x[0, 16:20], -1.0)
    assert np.allclose(w.x[0, 1:15], 0.0, atol=1e-12)
    assert np.all(np.diff(p[0, 15:]) > 0)


def test_dirichlet_left_matches_neumann_gradient(rng):
    g = build_grid(30)
    rho = np.zeros(g.shape)
    rho[0, 10:22] = rng.uniform(0.2, 1, 12)
    U = FaceField(np.ones((1, 31)), np.zeros((2, 30))).masked(g)
    wn, _ = correction_velocity(rho, U, g)
    wd, pd = correction_velocity(rho, U, g, BCSpec(DIRICHLET_LEFT_1D))
    assert np.max(np.abs(wn.x - wd.x)) < 1e-9
    assert abs(pd[0, 0]) < 1e-12


def test_multi_species_sums_rhs(rng):
    g = build_grid(10, 10, bc="periodic")
    r1 = rng.uniform(0, 0.5, g.shape)
    r2 = 1 - r1
    U1 = smooth_potential_field(g, rng)
    U2 = smooth_potential_field(g, rng)
    sys_ = assemble_laplacian(g)
    w, p = correction_velocity_multi([r1, r2], [U1, U2], g, system=sys_, tol=1e-12)
    rhs = divergence_upwind(r1, U1, g) + divergence_upwind(r2, U2, g)
    assert np.max(np.abs(sys_.apply(p) - rhs)) < 1e-9


def test_face_difference_of_linear_field():
    g = build_grid(8, 6)
    X, Y = g.centers
    d = face_difference(3 * X - 2 * Y, g)
    assert np.allclose(d.x[:, 1:-1], 3) and np.allclose(d.y[1:-1], -2)
    assert not d.x[:, [0, -1]].any()


def test_flux_through_walls_vanishes(rng):
    g = build_grid(12, 12, [[0.3, 0.6, 0.3, 0.6]])
    rho = blocky_density(g, rng)
    U = smooth_potential_field(g, rng)
    w, _ = correction_velocity(rho, U, g)
    total = upwind_face_flux(rho, U, g) + upwind_face_flux(rho, w, g)
    assert not total.x[~g.xface_open].any() and not total.y[~g.yface_open].any()
