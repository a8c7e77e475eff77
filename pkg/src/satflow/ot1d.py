"""Optimal transport on an interval for piecewise-constant densities.

In one dimension the optimal map between equal-mass densities is the
monotone rearrangement, so ``W2^2(a, b) = int_0^M |q_a(m) - q_b(m)|^2 dm``
with ``q`` the quantile (generalized inverse of the cumulative mass).  For
piecewise-constant densities the quantiles are piecewise linear and the
integral is evaluated exactly segment by segment.

The minimizing-movement step works on cell values of the active species
``rho1`` with ``rho2 = 1 - rho1``; each species keeps its mass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import ConfigError, MassMismatch, NoConvergence, ZeroMass

_GL_NODES = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0
_LEVEL_TOL = 1e-12


def _mass_tol(m: float) -> float:
    return 1e-12 * max(1.0, abs(m))


@dataclass(frozen=True, eq=False)
class Density1D:
    """Nonnegative piecewise-constant density on cells of ``[0, 1]``."""

    values: np.ndarray
    edges: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        e = np.linspace(0.0, 1.0, v.size + 1) if self.edges is None else np.asarray(self.edges, float)
        if e.size != v.size + 1 or np.any(np.diff(e) <= 0):
            raise ConfigError("edges must increase strictly, one more than values")
        if np.any(v < 0):
            raise ConfigError("density values must be nonnegative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "edges", e)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def cumulative(self) -> np.ndarray:
        """Cumulative mass at the cell edges."""
        return np.concatenate([[0.0], np.cumsum(self.values * self.widths)])

    @property
    def mass(self) -> float:
        return float(np.sum(self.values * self.widths))

    def cdf(self, x) -> np.ndarray:
        return np.interp(x, self.edges, self.cumulative)

    def complement(self) -> "Density1D":
        return Density1D(1.0 - self.values, self.edges)


def quantile(rho: Density1D, m):
    """Generalized inverse ``inf{x : F(x) >= m}`` of the cumulative mass.

    Raises
    ------
    ZeroMass
        ``rho`` carries no mass.
    """
    M = rho.mass
    if M <= 0:
        raise ZeroMass("quantile of a zero-mass density")
    m_arr = np.clip(np.asarray(m, dtype=float), 0.0, M)
    C = rho.cumulative
    k = np.clip(np.searchsorted(C, m_arr, side="left") - 1, 0, rho.n - 1)
    v = rho.values[k]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(v > 0, rho.edges[k] + (m_arr - C[k]) / np.where(v > 0, v, 1.0), rho.edges[k])
    q = np.where(m_arr <= 0.0, _first_support(rho), q)
    return float(q) if q.ndim == 0 else q


def _first_support(rho: Density1D) -> float:
    nz = np.flatnonzero(rho.values > 0)
    return float(rho.edges[nz[0]]) if nz.size else float(rho.edges[0])


def _check_masses(a: Density1D, b: Density1D) -> float:
    ma, mb = a.mass, b.mass
    if abs(ma - mb) > _mass_tol(max(ma, mb)):
        raise MassMismatch(f"masses differ: {ma!r} vs {mb!r}")
    return 0.5 * (ma + mb)


class _Coupling:
    """Monotone coupling of two densities, split at every mass breakpoint.

    On segment ``s`` (mass interval ``[m[s], m[s+1]]``) both quantiles are
    affine: ``q(m) = x0 + (m - m[s]) / v``.
    """

    def __init__(self, a: Density1D, b: Density1D):
        self.a, self.b = a, b
        M = _check_masses(a, b)
        self.M = M
        ca = np.minimum(a.cumulative, M)
        cb = np.minimum(b.cumulative, M)
        m = np.unique(np.concatenate([ca, cb, [0.0, M]]))
        m = m[(m >= 0) & (m <= M)]
        lengths = np.diff(m)
        # levels closer than round-off are one level: a near-coincidence of two
        # jumps must be seen as a kink, not as a sliver segment
        keep = np.concatenate([[True], lengths > _LEVEL_TOL * max(M, 1.0)])
        m = m[keep]
        if m[-1] != M:
            m[-1] = M
        self.m = m
        mid = 0.5 * (m[:-1] + m[1:])
        self.ka = self._cell(a, mid)
        self.kb = self._cell(b, mid)
        self.va = a.values[self.ka]
        self.vb = b.values[self.kb]
        Ca, Cb = a.cumulative, b.cumulative
        self.xa0 = a.edges[self.ka] + (m[:-1] - Ca[self.ka]) / self.va
        self.xb0 = b.edges[self.kb] + (m[:-1] - Cb[self.kb]) / self.vb
        L = np.diff(m)
        self.L = L
        self.xa1 = self.xa0 + L / self.va
        self.xb1 = self.xb0 + L / self.vb

    @staticmethod
    def _cell(rho: Density1D, m: np.ndarray) -> np.ndarray:
        C = rho.cumulative
        return np.clip(np.searchsorted(C, m, side="left") - 1, 0, rho.n - 1)

    def cost(self) -> float:
        d0 = self.xa0 - self.xb0
        d1 = self.xa1 - self.xb1
        return float(np.sum(self.L * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0))

    def jump_range(self, s: int) -> tuple[float, float]:
        """Admissible potential increments across the boundary before segment ``s``.

        With ``q_a`` jumping from ``A1`` to ``A2`` and ``q_b`` from ``Y1`` to
        ``Y2`` at that level, a potential must satisfy
        ``(A2 - Y2)^2 - (A1 - Y2)^2 <= dh <= (A2 - Y1)^2 - (A1 - Y1)^2``.
        The range collapses to a point unless both quantiles jump.
        """
        A1, A2 = self.xa1[s - 1], self.xa0[s]
        Y1, Y2 = self.xb1[s - 1], self.xb0[s]
        return (A2 - Y2) ** 2 - (A1 - Y2) ** 2, (A2 - Y1) ** 2 - (A1 - Y1) ** 2

    def kinks(self) -> list[int]:
        """Segment boundaries where both quantiles jump (``W2^2`` is not differentiable)."""
        out = []
        for s in range(1, self.L.size):
            lo, hi = self.jump_range(s)
            if hi - lo > 1e-14:
                out.append(s)
        return out

    def potential_levels(self, theta: Optional[dict] = None) -> tuple[np.ndarray, np.ndarray]:
        """Values of the potential along the coupling at each segment start/end.

        Along the coupling ``dh = 2 (q_a - q_b) dq_a``.  Across a kink the
        increment is ``lo + theta * (hi - lo)`` with ``theta`` in ``[0, 1]``
        taken from ``theta[s]`` (default 1/2); elsewhere it is unique.
        """
        theta = theta or {}
        nseg = self.L.size
        h0 = np.zeros(nseg)
        h1 = np.zeros(nseg)
        h = 0.0
        for s in range(nseg):
            if s > 0:
                lo, hi = self.jump_range(s)
                h += lo + theta.get(s, 0.5) * (hi - lo)
            h0[s] = h
            L, va, vb = self.L[s], self.va[s], self.vb[s]
            h += 2.0 / va * ((self.xa0[s] - self.xb0[s]) * L + (1.0 / va - 1.0 / vb) * L * L / 2.0)
            h1[s] = h
        return h0, h1


def w2(rho_a: Density1D, rho_b: Density1D) -> float:
    """Quadratic Wasserstein distance between equal-mass densities.

    Raises
    ------
    MassMismatch
        masses differ by more than ``1e-12`` (relative to ``max(1, M)``).
    """
    return float(np.sqrt(max(w2_squared(rho_a, rho_b), 0.0)))


def w2_squared(rho_a: Density1D, rho_b: Density1D) -> float:
    M = _check_masses(rho_a, rho_b)
    if M <= 0:
        return 0.0
    return max(_Coupling(rho_a, rho_b).cost(), 0.0)


def kantorovich_potential(rho_a: Density1D, rho_b: Density1D, theta: Optional[dict] = None):
    """First variation ``phi`` of ``W2^2(., rho_b)`` at ``rho_a`` as a callable.

    ``phi`` satisfies ``phi' = 2 (x - T(x))`` on the support of ``rho_a``, with
    ``T`` the monotone map, and is extended off the support by the c-transform
    (cheapest admissible coupling).  Defined up to an additive constant.
    Returns ``(phi, breakpoints)`` where between consecutive breakpoints
    ``phi`` is a single quadratic.  ``theta`` selects the increment at kinks
    (see :meth:`_Coupling.potential_levels`); each choice is a subgradient.
    """
    cp = _Coupling(rho_a, rho_b)
    h0, h1 = cp.potential_levels(theta)
    m = cp.m
    nseg = cp.L.size
    a = rho_a

    def seg_eval(s, x, mm):
        off = mm - m[s]
        qa = cp.xa0[s] + off / cp.va[s]
        qb = cp.xb0[s] + off / cp.vb[s]
        h = h0[s] + 2.0 / cp.va[s] * (
            (cp.xa0[s] - cp.xb0[s]) * off + (1.0 / cp.va[s] - 1.0 / cp.vb[s]) * off * off / 2.0
        )
        return (x - qb) ** 2 - (qa - qb) ** 2 + h

    def phi(x):
        x = np.asarray(x, dtype=float)
        mm = np.clip(a.cdf(x), 0.0, cp.M)
        s_left = np.searchsorted(m, mm, side="left") - 1
        s_right = np.searchsorted(m, mm, side="right") - 1
        left_ok = s_left >= 0
        right_ok = s_right <= nseg - 1
        sl = np.clip(s_left, 0, nseg - 1)
        sr = np.clip(s_right, 0, nseg - 1)
        el = np.where(left_ok, seg_eval(sl, x, mm), np.inf)
        er = np.where(right_ok, seg_eval(sr, x, mm), np.inf)
        return np.minimum(el, er)

    pts = [a.edges, cp.xa0, cp.xa1]
    # crossing of the two candidate branches inside each gap of rho_a
    for s in range(1, nseg):
        ga, gb = cp.xa1[s - 1], cp.xa0[s]
        y1, y2 = cp.xb1[s - 1], cp.xb0[s]
        if gb - ga > 0 and y2 > y1:
            num = (y2 * y2 - y1 * y1 - (gb - y2) ** 2 + (ga - y1) ** 2 + h0[s] - h1[s - 1])
            xc = num / (2.0 * (y2 - y1))
            if ga < xc < gb:
                pts.append(np.array([xc]))
    bps = np.unique(np.clip(np.concatenate(pts), a.edges[0], a.edges[-1]))
    return phi, bps


def _integrate_cells(fun, bps: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Integrate a piecewise-quadratic ``fun`` over each cell, exactly.

    Three-point Gauss-Legendre on every piece between ``bps`` (which must
    include the cell edges); nodes are interior so jump conventions at the
    breakpoints never matter.
    """
    x0, x1 = bps[:-1], bps[1:]
    keep = x1 > x0
    x0, x1 = x0[keep], x1[keep]
    half = 0.5 * (x1 - x0)
    mid = 0.5 * (x0 + x1)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = fun(nodes) @ _GL_WEIGHTS * half
    cell = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, edges.size - 2)
    return np.bincount(cell, weights=vals, minlength=edges.size - 1)


def w2_squared_gradient(rho_a: Density1D, rho_b: Density1D, theta: Optional[dict] = None) -> np.ndarray:
    """Derivative of ``W2^2(rho_a, rho_b)`` with respect to the cell values of ``rho_a``.

    Exact for mass-preserving directions (it is the cell integral of the
    Kantorovich potential); the additive constant is arbitrary.  Where both
    densities have a gap at the same mass level the function has a kink and
    ``theta`` picks one subgradient.
    """
    if rho_a.mass <= 0:
        return np.zeros(rho_a.n)
    phi, bps = kantorovich_potential(rho_a, rho_b, theta)
    bps = np.unique(np.concatenate([bps, rho_a.edges]))
    return _integrate_cells(phi, bps, rho_a.edges)


def w2_kinks(rho_a: Density1D, rho_b: Density1D) -> list[int]:
    """Kink labels of ``W2^2(., rho_b)`` at ``rho_a`` (keys accepted by ``theta``)."""
    if rho_a.mass <= 0:
        return []
    return _Coupling(rho_a, rho_b).kinks()


def transport_cost_x(mu: Density1D, nu: Density1D) -> float:
    """``int |T(x) - x|^2 dmu(x)`` for the monotone map ``T = q_nu o F_mu``.

    Evaluated in physical space with the public :func:`quantile`, as an
    independent route to ``W2^2``.
    """
    _check_masses(mu, nu)
    if mu.mass <= 0:
        return 0.0
    Cnu = nu.cumulative
    # T is affine between preimages of nu's cumulative breakpoints
    pre = quantile(mu, Cnu[(Cnu > 0) & (Cnu < mu.mass)])
    bps = np.unique(np.concatenate([mu.edges, np.atleast_1d(pre)]))

    def integrand(x):
        dens = mu.values[np.clip(np.searchsorted(mu.edges, x, side="right") - 1, 0, mu.n - 1)]
        t = quantile(nu, mu.cdf(x))
        return dens * (t - x) ** 2

    return float(np.sum(_integrate_cells(integrand, bps, mu.edges)))


def product_w2_check(mu1: Density1D, nu1: Density1D, mu2: Density1D, nu2: Density1D) -> tuple[float, float]:
    """Both sides of the product-measure additivity identity.

    ``lhs`` is the cost of the pair map ``(r1, r2)`` on ``mu1 (x) mu2``:
    ``M2 int|r1 - id|^2 dmu1 + M1 int|r2 - id|^2 dmu2`` computed in physical
    space; ``rhs = M2 W2^2(mu1, nu1) + M1 W2^2(mu2, nu2)`` from the quantile
    integrals.  For probability measures the weights are 1.
    """
    m1 = _check_masses(mu1, nu1)
    m2 = _check_masses(mu2, nu2)
    lhs = m2 * transport_cost_x(mu1, nu1) + m1 * transport_cost_x(mu2, nu2)
    rhs = m2 * w2_squared(mu1, nu1) + m1 * w2_squared(mu2, nu2)
    return lhs, rhs


# --- minimizing movement ------------------------------------------------


@dataclass(frozen=True)
class JKOParams:
    tau: float
    step: float = 1.0  # initial trial step (inverse proximal weight)
    max_iter: int = 2000
    tol: float = 1e-13  # predicted objective decrease at which to stop

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("tau must be positive")


@dataclass
class JKOResult:
    rho: Density1D
    objective: float
    stationarity: float  # model-predicted decrease left at exit
    iterations: int
    initial_objective: float


def project_capped_simplex(y: np.ndarray, total: float, cap: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{0 <= v <= cap, sum v = total}``.

    ``sum clip(y - lam, 0, cap)`` is piecewise linear and nonincreasing in
    ``lam``; the root is located among its breakpoints and solved exactly.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not 0.0 <= total <= n * cap * (1 + 1e-12):
        raise ConfigError(f"total {total} not attainable with {n} entries capped at {cap}")
    total = min(total, n * cap)
    cand = np.unique(np.concatenate([y, y - cap]))
    sums = np.clip(y[None, :] - cand[:, None], 0.0, cap).sum(axis=1)  # nonincreasing
    # first candidate with sum <= total
    k = int(np.searchsorted(-sums, -total, side="left"))
    if k == 0:
        lam = cand[0]
    elif k >= cand.size:
        lam = cand[-1]
    else:
        l0, l1 = cand[k - 1], cand[k]
        s0, s1 = sums[k - 1], sums[k]
        lam = l0 if s0 == s1 else l0 + (s0 - total) * (l1 - l0) / (s0 - s1)
    v = np.clip(y - lam, 0.0, cap)
    # remove the last rounding error on free entries
    free = (v > 0) & (v < cap)
    if free.any():
        v[free] += (total - v.sum()) / free.sum()
        v = np.clip(v, 0.0, cap)
    return v


class JKOProblem:
    """Objective of one minimizing-movement step for ``rho1`` (``rho2 = 1 - rho1``).

    ``J(r) = int D1 r + int D2 (1 - r) + (W2^2(r, prev1) + W2^2(1 - r, prev2)) / (2 tau)``
    with potentials sampled at cell centres.
    """

    def __init__(self, prev: Density1D, D1: np.ndarray, D2: np.ndarray, tau: float):
        if np.any(prev.values > 1.0 + 1e-12):
            raise ConfigError("previous density exceeds 1")
        self.prev1 = prev
        self.prev2 = prev.complement()
        self.D1 = np.asarray(D1, dtype=float).ravel()
        self.D2 = np.asarray(D2, dtype=float).ravel()
        if self.D1.size != prev.n or self.D2.size != prev.n:
            raise ConfigError("potentials must be sampled on the density cells")
        self.tau = tau
        self.w = prev.widths

    def _densities(self, r):
        r = np.clip(r, 0.0, 1.0)
        return Density1D(r, self.prev1.edges), Density1D(1.0 - r, self.prev1.edges)

    def value(self, r: np.ndarray) -> float:
        a, b = self._densities(r)
        lin = float(np.sum(self.w * (self.D1 * a.values + self.D2 * b.values)))
        return lin + (w2_squared(a, self.prev1) + w2_squared(b, self.prev2)) / (2.0 * self.tau)

    def gradient(self, r: np.ndarray, theta: Optional[np.ndarray] = None) -> np.ndarray:
        """A subgradient; ``theta`` holds one value in ``[0, 1]`` per entry of :meth:`kinks`."""
        a, b = self._densities(r)
        k1, k2 = self.kinks(r)
        theta = np.full(len(k1) + len(k2), 0.5) if theta is None else np.asarray(theta, dtype=float)
        t1 = dict(zip(k1, theta[: len(k1)]))
        t2 = dict(zip(k2, theta[len(k1):]))
        g = self.w * (self.D1 - self.D2)
        g = g + (w2_squared_gradient(a, self.prev1, t1) - w2_squared_gradient(b, self.prev2, t2)) / (2.0 * self.tau)
        return g

    def kinks(self, r: np.ndarray) -> tuple[list, list]:
        a, b = self._densities(r)
        return w2_kinks(a, self.prev1), w2_kinks(b, self.prev2)


class _Bundle:
    """Cutting-plane model ``max_i (f_i + g_i . (r - r_i))`` of a convex function."""

    def __init__(self, max_size: int = 40):
        self.G = []
        self.b = []  # f_i - g_i . r_i
        self.max_size = max_size

    def add(self, r, f, g):
        self.G.append(np.asarray(g, dtype=float))
        self.b.append(float(f - g @ r))

    def model(self, r) -> float:
        return float(np.max(np.array(self.G) @ r + np.array(self.b)))

    def prox_step(self, center, mu, total):
        """Minimize ``model(r) + mu/2 |r - center|^2`` over the capped simplex.

        Epigraph form ``min t + mu/2 |r - center|^2`` with one linear
        constraint per cut, solved by SLSQP; the result is projected back onto
        the feasible set so mass and bounds hold to round-off.
        """
        G = np.array(self.G)
        b = np.array(self.b)
        n = center.size

        def fun(z):
            d = z[:n] - center
            return z[n] + 0.5 * mu * d @ d

        def jac(z):
            return np.concatenate([mu * (z[:n] - center), [1.0]])

        A_cut = np.hstack([-G, np.ones((b.size, 1))])
        cons = [
            {"type": "ineq", "fun": lambda z: z[n] - G @ z[:n] - b, "jac": lambda z: A_cut},
            {"type": "eq", "fun": lambda z: np.array([z[:n].sum() - total]),
             "jac": lambda z: np.concatenate([np.ones(n), [0.0]])[None, :]},
        ]
        z0 = np.concatenate([center, [float(np.max(G @ center + b))]])
        bounds = [(0.0, 1.0)] * n + [(None, None)]
        sol = optimize.minimize(fun, z0, jac=jac, bounds=bounds, constraints=cons, method="SLSQP",
                                options={"ftol": 1e-16, "maxiter": 500})
        return project_capped_simplex(np.clip(sol.x[:n], 0.0, 1.0), total)

    def compress(self, r):
        """Drop cuts inactive at ``r`` once the bundle is full, keeping the newest."""
        if len(self.b) <= self.max_size:
            return
        vals = np.array(self.G) @ r + np.array(self.b)
        active = vals >= vals.max() - 1e-12 * max(1.0, abs(vals.max()))
        keep = set(np.flatnonzero(active)) | set(range(len(self.b) - self.max_size // 2, len(self.b)))
        keep = sorted(keep)
        self.G = [self.G[i] for i in keep]
        self.b = [self.b[i] for i in keep]


def jko_step(
    rho1_prev: Density1D,
    D1: np.ndarray,
    D2: np.ndarray,
    params: JKOParams,
) -> JKOResult:
    """One minimizing-movement step for ``rho1`` (``rho2 = 1 - rho1``).

    The objective is convex in the cell values but has kinks wherever a
    density and its predecessor both have a gap at the same mass level (a
    saturated block that does not move).  It is minimized by a proximal
    bundle method: each trial point is the projection onto
    ``{0 <= rho1 <= 1, mass fixed}`` of the centre minus an aggregated
    subgradient, and the centre only moves on sufficient decrease, so the
    objective decreases monotonically.  At an exact kink the two extreme
    subgradients both enter the model.

    Stops when the model predicts a decrease below ``params.tol`` (objective
    units); that predicted decrease is reported as ``stationarity``.

    Raises
    ------
    NoConvergence
        iteration cap reached; ``info`` carries the last centre, objective
        and predicted decrease.
    """
    prob = JKOProblem(rho1_prev, D1, D2, params.tau)
    w = prob.w
    if not np.allclose(w, w[0]):
        raise ConfigError("jko_step expects a uniform grid")
    total = rho1_prev.mass / w[0]
    bundle = _Bundle()

    def add_cuts(r, f):
        k1, k2 = prob.kinks(r)
        K = len(k1) + len(k2)
        if K == 0:
            bundle.add(r, f, prob.gradient(r))
            return
        for th in (np.zeros(K), np.ones(K)):
            bundle.add(r, f, prob.gradient(r, th))
        if K > 1:
            for k in range(K):
                for v in (0.0, 1.0):
                    th = np.full(K, 0.5)
                    th[k] = v
                    bundle.add(r, f, prob.gradient(r, th))

    rc = project_capped_simplex(rho1_prev.values, total)
    fc = prob.value(rc)
    f_init = fc
    add_cuts(rc, fc)
    mu = 1.0 / params.step
    it = 0
    while True:
        r_new = bundle.prox_step(rc, mu, total)
        delta = fc - bundle.model(r_new)
        if delta <= params.tol:
            break
        if it >= params.max_iter:
            raise NoConvergence(
                f"JKO step did not reach tol {params.tol:g} in {params.max_iter} iterations",
                rho=Density1D(rc, rho1_prev.edges),
                objective=fc,
                stationarity=delta,
            )
        it += 1
        f_new = prob.value(r_new)
        if f_new <= fc - 0.1 * delta:
            if f_new <= fc - 0.8 * delta:
                mu = max(mu * 0.5, 1e-12)
            rc, fc = r_new, f_new
        else:
            mu = min(mu * 2.0, 1e15)
        add_cuts(r_new, f_new)
        bundle.compress(r_new)
    return JKOResult(Density1D(rc, rho1_prev.edges), fc, max(delta, 0.0), it, f_init)
