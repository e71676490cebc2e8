"""Analytic solutions, manufactured test functions and error norms."""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "TOPHAT_TERMS",
    "TOPHAT_KMAX",
    "test_function",
    "l2_norm",
    "ratio_R",
    "ad_exact_case1",
    "ad_exact_case2",
    "bessel_i_sequence",
    "burgers_exact",
    "periodic_poisson_problem",
    "disc_poisson_problem",
]

TOPHAT_TERMS = 8
# largest |k| present in the test function: (2*8 - 1) * 2 pi along x, 2 pi along y
TOPHAT_KMAX = math.pi * math.sqrt(904.0)


def test_function(x, y):
    """Eight-term top-hat Fourier series in x times sin(2 pi y).

    Returns ``(phi, (phi_x, phi_y), laplacian)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f = np.zeros(np.broadcast(x, y).shape)
    fx = np.zeros_like(f)
    fxx = np.zeros_like(f)
    for k in range(1, TOPHAT_TERMS + 1):
        n = 2 * k - 1
        a = 2.0 * n * math.pi
        arg = a * (x - 0.25)
        f += np.sin(arg) / n
        fx += a * np.cos(arg) / n
        fxx -= a * a * np.sin(arg) / n
    c = 4.0 / math.pi
    w = 2.0 * math.pi
    sy, cy = np.sin(w * y), np.cos(w * y)
    phi = c * f * sy
    grad = (c * fx * sy, c * f * w * cy)
    lap = c * (fxx * sy - w * w * f * sy)
    return phi, grad, lap


test_function.__test__ = False  # not a pytest test


def l2_norm(numeric, analytic) -> float:
    """Relative discrete L2 error."""
    numeric = np.asarray(numeric, dtype=float)
    analytic = np.asarray(analytic, dtype=float)
    if numeric.shape != analytic.shape:
        raise ValueError("fields are not aligned")
    den = math.sqrt(float(np.sum(analytic * analytic)))
    if den == 0:
        raise ValueError("analytic field is identically zero")
    return math.sqrt(float(np.sum((analytic - numeric) ** 2))) / den


def ratio_R(mk_err, sk_err):
    """Error ratio MK/SK; NaN where the single-kernel error is zero."""
    mk = np.asarray(mk_err, dtype=float)
    sk = np.asarray(sk_err, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sk > 0, mk / np.where(sk > 0, sk, 1.0), np.nan)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# advection-diffusion


def _decay(m, t, re):
    return np.exp(-4.0 * m * m * math.pi ** 2 * t / re)


def ad_exact_case1(x, y, t, M=3, Re=50.0, a=(1.0, 0.0)):
    """sum_m exp(-4 m^2 pi^2 t / Re) sin(2 pi m (x - a_x t)) on the unit square."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(np.broadcast(x, np.asarray(y, dtype=float)).shape)
    for m in range(1, M + 1):
        out += _decay(m, t, Re) * np.sin(2.0 * math.pi * m * (x - a[0] * t))
    return out


def ad_exact_case2(x, y, t, M=3, Re=50.0, a=(1.0, 0.0)):
    """Diagonal waves sin(sqrt(2) m pi (x + y - a_x t)) on the square of side sqrt(2).

    Only a = (a_x, 0) is supported, as the diagonal phase then moves at a_x.
    """
    if a[1] != 0:
        raise ValueError("case 2 is defined for advection along x")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    k = math.sqrt(2.0) * math.pi
    for m in range(1, M + 1):
        out += _decay(m, t, Re) * np.sin(k * m * (x + y - a[0] * t))
    return out


# --------------------------------------------------------------------------
# Burgers


def bessel_i_sequence(n_max: int, z: float, extra: int = 60) -> np.ndarray:
    """exp(-z) I_n(z) for n = 0..n_max by Miller's downward recurrence.

    The unnormalised sequence is scaled so that I_0 + 2 sum_n I_n = e^z.
    """
    if z < 0:
        raise ValueError("argument must be non-negative")
    if z == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    start = n_max + extra + int(2 * z)
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    for n in range(start, 0, -1):
        vals[n - 1] = vals[n + 1] + (2.0 * n / z) * vals[n]
        if vals[n - 1] > 1e250:
            vals[n - 1:] *= 1e-250
    total = vals[0] + 2.0 * vals[1:].sum()
    return vals[: n_max + 1] / total


def burgers_exact(x, t, Re=10.0, n_terms=40):
    """Cole's series for u_t + u u_x = u_xx / Re with u(x, 0) = sin(2 pi x)."""
    x = np.asarray(x, dtype=float)
    z = Re / (4.0 * math.pi)
    a = bessel_i_sequence(n_terms, z)
    a[1:] *= 2.0
    n = np.arange(1, n_terms + 1)
    decay = np.exp(-4.0 * n * n * math.pi ** 2 * t / Re)
    phase = 2.0 * math.pi * np.multiply.outer(x, n)
    num = (n * a[1:] * decay * np.sin(phase)).sum(axis=-1)
    den = a[0] + (a[1:] * decay * np.cos(phase)).sum(axis=-1)
    if np.any(~(np.abs(den) > 1e-300)):
        raise FloatingPointError("series denominator underflow")
    return 4.0 * math.pi / Re * num / den


# --------------------------------------------------------------------------
# Poisson


def periodic_poisson_problem(x, y):
    """Forcing -8 pi^2 sin(2 pi x) sin(2 pi y) and its mean-zero solution."""
    sol = np.sin(2 * math.pi * np.asarray(x)) * np.sin(2 * math.pi * np.asarray(y))
    return -8.0 * math.pi ** 2 * sol, sol


def disc_poisson_problem(x, y):
    """Forcing and solution r^4 cos(pi r / 2) cos(theta) on the unit disc.

    The forcing is the analytic Laplacian of the solution, and the solution
    vanishes on r = 1.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_t = np.where(r > 0, x / np.where(r > 0, r, 1.0), 1.0)
    g = r ** 4 * np.cos(0.5 * math.pi * r)
    g1 = 4 * r ** 3 * np.cos(0.5 * math.pi * r) - 0.5 * math.pi * r ** 4 * np.sin(0.5 * math.pi * r)
    g2 = (12 * r ** 2 * np.cos(0.5 * math.pi * r) - 4 * math.pi * r ** 3 * np.sin(0.5 * math.pi * r)
          - 0.25 * math.pi ** 2 * r ** 4 * np.cos(0.5 * math.pi * r))
    # (g'' + g'/r - g/r^2) cos(theta); every term carries at least r^2
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(r > 0, g2 + g1 / np.where(r > 0, r, 1.0) - g / np.where(r > 0, r * r, 1.0), 0.0)
    return radial * cos_t, g * cos_t
