"""Explicit RK4 time integration for the advection-diffusion and Burgers systems."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DivergenceError",
    "timestep",
    "rk4_step",
    "rk4_advance",
    "advection_diffusion_rhs",
    "advection_diffusion_matrix",
    "burgers_rhs",
    "BurgersOperator",
    "rk4_propagator",
    "matrix_power",
    "Filter",
]


class DivergenceError(FloatingPointError):
    """The state became non-finite."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


def timestep(s: float, u_max: float, Re: float) -> float:
    """min(0.1 s / u_max, 0.05 s^2 / Re); either bound drops out when infinite."""
    if s <= 0:
        raise ValueError("spacing must be positive")
    conv = 0.1 * s / u_max if u_max > 0 else math.inf
    diff = 0.05 * s * s / Re if Re > 0 and math.isfinite(Re) else math.inf
    dt = min(conv, diff)
    if not math.isfinite(dt):
        raise ValueError("no finite time-step bound (u_max = 0 and Re = inf)")
    return dt


class Filter:
    """phi + kappa * H phi applied after each full step."""

    def __init__(self, hyper, kappa):
        self.hyper = hyper if sp.issparse(hyper) else hyper.matrix
        self.kappa = np.asarray(kappa, dtype=float)

    def __call__(self, state):
        k = self.kappa if state.ndim == 1 else self.kappa[:, None]
        return state + k * (self.hyper @ state)

    def matrix(self):
        n = self.hyper.shape[0]
        return sp.identity(n, format="csr") + sp.diags(np.broadcast_to(self.kappa, (n,))) @ self.hyper


def rk4_step(state, rhs, dt, t=0.0):
    k1 = rhs(state, t)
    k2 = rhs(state + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(state + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(state + dt * k3, t + dt)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_advance(state, rhs, dt, n_steps=1, t0=0.0, filter=None, check_every=100):
    """Advance ``n_steps`` classical RK4 steps of size ``dt``.

    ``rhs(state, t)`` returns the time derivative.  A ``filter`` callable is
    applied after every full step.  Raises :class:`DivergenceError` with the
    time of the first non-finite state found (checked every
    ``check_every`` steps and at the end).
    """
    state = np.array(state, dtype=float)
    t = t0
    for n in range(n_steps):
        state = rk4_step(state, rhs, dt, t)
        if filter is not None:
            state = filter(state)
        t = t0 + (n + 1) * dt
        if (n + 1) % check_every == 0 or n + 1 == n_steps:
            if not np.all(np.isfinite(state)):
                raise DivergenceError(f"non-finite state at t = {t:.6g}", t)
    return state


def advection_diffusion_matrix(ddx, ddy, lap, a, Re):
    """Sparse -a.grad + lap / Re from global operators (or matrices)."""
    mats = [o.matrix if hasattr(o, "matrix") else o for o in (ddx, ddy, lap)]
    out = (-a[0]) * mats[0] + (1.0 / Re) * mats[2]
    if a[1] != 0:
        out = out - a[1] * mats[1]
    return out.tocsr()


def advection_diffusion_rhs(u, ops, a, Re):
    """-a.grad u + lap u / Re with ``ops = (ddx, ddy, lap)``."""
    ddx, ddy, lap = (o.matrix if hasattr(o, "matrix") else o for o in ops)
    out = -a[0] * (ddx @ u) + (lap @ u) / Re
    if a[1] != 0:
        out -= a[1] * (ddy @ u)
    return out


def burgers_rhs(u, v, ops, Re):
    """Componentwise -(u.grad) u + lap u / Re."""
    ddx, ddy, lap = (o.matrix if hasattr(o, "matrix") else o for o in ops)
    uv = np.column_stack([u, v])
    gx = ddx @ uv
    gy = ddy @ uv
    lp = lap @ uv
    du = -u * gx[:, 0] - v * gy[:, 0] + lp[:, 0] / Re
    dv = -u * gx[:, 1] - v * gy[:, 1] + lp[:, 1] / Re
    return du, dv


class BurgersOperator:
    """Burgers right-hand side on a stacked (N, 2) state using one sparse product."""

    def __init__(self, ops, Re):
        mats = [o.matrix if hasattr(o, "matrix") else o for o in ops]
        self.n = mats[0].shape[0]
        self.stack = sp.vstack(mats).tocsr()
        self.Re = Re

    def __call__(self, state, t=0.0):
        n = self.n
        u = state[:, 0]
        v = state[:, 1]
        out = np.empty_like(state)
        # one product per component is faster than a two-column block product
        for c in (0, 1):
            g = self.stack @ np.ascontiguousarray(state[:, c])
            out[:, c] = -u * g[:n] - v * g[n:2 * n] + g[2 * n:] / self.Re
        return out


def rk4_propagator(a, dt, filter_matrix=None) -> np.ndarray:
    """Dense one-step RK4 matrix I + dtA + (dtA)^2/2 + (dtA)^3/6 + (dtA)^4/24.

    For a linear system this is the exact action of one RK4 step (optionally
    followed by a linear filter).
    """
    a = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)
    n = a.shape[0]
    h = dt * a
    # Horner form: I + h (I + h/2 (I + h/3 (I + h/4)))
    eye = np.eye(n)
    p = eye + h / 4.0
    p = eye + (h @ p) / 3.0
    p = eye + (h @ p) / 2.0
    p = eye + h @ p
    if filter_matrix is not None:
        f = filter_matrix.toarray() if sp.issparse(filter_matrix) else np.asarray(filter_matrix)
        p = f @ p
    return p


def matrix_power(p: np.ndarray, k: int) -> np.ndarray:
    """p^k by binary exponentiation."""
    if k < 0:
        raise ValueError("negative power")
    result = np.eye(p.shape[0])
    base = p.copy()
    first = True
    while k:
        if k & 1:
            result = base.copy() if first else result @ base
            first = False
        k >>= 1
        if k:
            base = base @ base
    return result
