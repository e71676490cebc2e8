"""Shared fixtures and the acceptance summary hook."""
from __future__ import annotations

import functools

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from mkmesh.nodeset import DomainSpec, StencilSet, generate_nodes

# lines recorded by the acceptance tests, echoed at the end of the session
ACCEPTANCE_LINES: list = []


@functools.lru_cache(maxsize=None)
def periodic_nodes(s: float, seed: int = 1, width: float = 1.0):
    """Cached node sets (NodeSet is immutable)."""
    return generate_nodes(DomainSpec.periodic(width), s, seed)


def random_stencils(n: int, count: int, seed: int = 0, scale: float = 1.0) -> StencilSet:
    """Stencils of ``count`` jittered-lattice neighbours around random centres.

    The centre sits at a random point of a lattice cell and the neighbours
    are the nearest lattice points after a 30% jitter, so every stencil is
    quasi-uniform but distinct.
    """
    rng = np.random.default_rng(seed)
    side = int(np.ceil(np.sqrt(count))) + 4
    g = np.arange(-side, side + 1, dtype=float)
    lattice = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    offsets = []
    for _ in range(n):
        pts = lattice + rng.uniform(-0.3, 0.3, lattice.shape) - rng.uniform(-0.5, 0.5, 2)
        r = np.hypot(pts[:, 0], pts[:, 1])
        offsets.append(scale * pts[np.argsort(r)[:count]])
    nbrs = [np.arange(1, count + 1) for _ in range(n)]
    return StencilSet.from_lists(np.zeros(n, dtype=np.int64), nbrs, offsets)


def exact_monomial_derivative(op: str, a: int, b: int, x: float, y: float) -> float:
    """ddx, ddy or Laplacian of x^a y^b at (x, y), by hand."""

    def term(c, p, q, u, v):
        if c == 0 or p < 0 or q < 0:
            return 0.0
        return c * u ** p * v ** q

    if op == "ddx":
        return term(a, a - 1, b, x, y)
    if op == "ddy":
        return term(b, a, b - 1, x, y)
    return term(a * (a - 1), a - 2, b, x, y) + term(b * (b - 1), a, b - 2, x, y)


def monomial_error(ws, m: int, center=(0.3, -0.2)) -> float:
    """Worst condition-scaled error of ``ws`` on all monomials of degree <= m.

    The monomial is evaluated in coordinates where the stencil centre sits
    at ``center``; the error is divided by max(|exact|, sum_j |w_j dp_j|),
    the magnitude of the terms that cancel in the weighted sum.
    """
    st = ws.stencils
    cx, cy = center
    worst = 0.0
    for deg in range(0, m + 1):
        for b in range(deg + 1):
            a = deg - b
            p0 = cx ** a * cy ** b
            dp = (cx + st.offsets[..., 0]) ** a * (cy + st.offsets[..., 1]) ** b - p0
            dp = np.where(st.mask, dp, 0.0)
            approx = (ws.weights * dp).sum(axis=1)
            exact = exact_monomial_derivative(str(ws.operator), a, b, cx, cy)
            scale = np.maximum(abs(exact), np.abs(ws.weights * dp).sum(axis=1))
            scale = np.where(scale > 0, scale, 1.0)
            worst = max(worst, float(np.max(np.abs(approx - exact) / scale)))
    return worst


def polar_half_disc(k_m: float, n_r: int = 32, n_t: int = 48):
    """Midpoint points and areas on the half-disc |k| <= k_m, k_x >= 0."""
    r = (np.arange(n_r) + 0.5) * k_m / n_r
    t = -0.5 * np.pi + (np.arange(n_t) + 0.5) * np.pi / n_t
    rr, tt = np.meshgrid(r, t, indexing="ij")
    pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    return pts, (rr * (k_m / n_r) * (np.pi / n_t)).ravel()


class GoldenOracle:
    """E(c) summed in long double from plane-wave responses, minimised by golden section.

    The residual at c = 0 and its change per unit c are tabulated once, so
    each evaluation only rounds at the size of the residual itself.
    """

    def __init__(self, offsets, w_hat, w_bar, op: str, k_m: float):
        pts, area = polar_half_disc(k_m)
        ld = np.longdouble
        phase = np.asarray(offsets, dtype=ld) @ pts.astype(ld).T
        sn, omc = np.sin(phase), 1 - np.cos(phase)
        wh, wb = np.asarray(w_hat, dtype=ld), np.asarray(w_bar, dtype=ld)
        k = pts.astype(ld)
        target = {"ddx": k[:, 0], "ddy": k[:, 1]}.get(op, (k ** 2).sum(axis=1))
        s_bar, o_bar = wb @ sn, wb @ omc
        ds, do = (wh - wb) @ sn, (wh - wb) @ omc
        if op in ("ddx", "ddy"):
            # real residual target - sum w sin, imaginary sum w (1 - cos)
            self.re0, self.dre, self.im0, self.dim = target - s_bar, -ds, o_bar, do
        else:
            self.re0, self.dre, self.im0, self.dim = target - o_bar, -do, s_bar, ds
        self.area = area.astype(ld)

    def __call__(self, c):
        c = np.longdouble(c)
        re = self.re0 + c * self.dre
        im = self.im0 + c * self.dim
        return np.sum(self.area * (re * re + im * im))

    def minimise(self, lo=-1.0, hi=2.0, tol=1e-12):
        # expand until the bracket holds a minimum, then golden-section search
        while self(lo) < self(0.5 * (lo + hi)):
            lo -= 2 * (hi - lo)
        while self(hi) < self(0.5 * (lo + hi)):
            hi += 2 * (hi - lo)
        g = (np.sqrt(5.0) - 1) / 2
        a, b = np.longdouble(lo), np.longdouble(hi)
        x1, x2 = b - g * (b - a), a + g * (b - a)
        f1, f2 = self(x1), self(x2)
        while b - a > tol * max(1.0, abs(float(a))):
            if f1 < f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - g * (b - a)
                f1 = self(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + g * (b - a)
                f2 = self(x2)
        return float(0.5 * (a + b))


def burgers_fd_reference(t_end: float, Re: float = 10.0, n: int = 4096):
    """1-D periodic Burgers from u(x, 0) = sin(2 pi x) by finite differences.

    Fourth-order central differences on ``n`` points and a stiff BDF
    integrator at tight tolerances.  Returns the grid and the solution.
    """
    h = 1.0 / n
    x = np.arange(n) * h
    ones = np.ones(n)

    def circulant(coefs):
        diags, offs = [], []
        for o, c in coefs.items():
            for wrapped in {o % n, o % n - n}:
                diags.append(c * ones)
                offs.append(wrapped)
        return sp.diags(diags, offs, shape=(n, n), format="csr")

    d1 = circulant({-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}) / h
    d2 = circulant({-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12}) / h ** 2

    def rhs(t, u):
        return -u * (d1 @ u) + (d2 @ u) / Re

    def jac(t, u):
        return (-sp.diags(d1 @ u) - sp.diags(u) @ d1 + d2 / Re).tocsc()

    sol = solve_ivp(rhs, (0.0, t_end), np.sin(2 * np.pi * x), method="BDF", jac=jac, rtol=1e-11, atol=1e-13)
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return x, sol.y[:, -1]


@pytest.fixture(scope="session")
def nodes441():
    """The seeded 441-node reference set on the unit periodic square."""
    return periodic_nodes(1.0 / 21.0, 7)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
